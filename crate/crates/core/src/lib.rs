//! Mediation testing under a composite null.
//!
//! The crate implements the Cauchy-combined studentized mediation test (CSMT)
//! together with the classical Sobel and MaxP comparators, a simulation
//! harness for empirical size and power studies, and a CSV-driven workflow
//! for two-arm trial data.
//!
//! ```
//! use csmt::{csmt, choose_k, Dataset, RandomSource};
//!
//! let mut st = RandomSource::new(7).stream();
//! let n = 200;
//! let s: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
//! let g: Vec<f64> = s.iter().map(|v| 0.5 * v + st.normal()).collect();
//! let y: Vec<f64> = g.iter().map(|v| 0.5 * v + st.normal()).collect();
//! let ds = Dataset::new(s, g, y, vec![]).unwrap();
//!
//! let k = choose_k(ds.n()).unwrap();
//! let result = csmt(&ds, k, 100, &RandomSource::new(1)).unwrap();
//! assert!(result.p_value < 0.05);
//! ```

pub mod cli_io;
pub mod distributions;
pub mod error;
pub mod medtests;
pub mod regress;
pub mod simulate;

pub use distributions::RandomSource;
pub use error::{Error, Result};
pub use medtests::{
    cauchy_combine, choose_k, csmt, csmt_with, make_partition, maxp_test, sobel_statistic, sobel_test,
    subsampling_t_test, CsmtOptions, Method, TestResult, WeightScheme,
};
pub use regress::{fit_alpha, fit_beta, Dataset, RegressionFit};

/// Guide chapters under `book/src`, compiled here so their snippets stay
/// in sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/composite-null.md")]
    mod composite_null {}
    #[doc = include_str!("../../../book/src/subsampling.md")]
    mod subsampling {}
    #[doc = include_str!("../../../book/src/cauchy.md")]
    mod cauchy {}
    #[doc = include_str!("../../../book/src/csmt.md")]
    mod csmt {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
