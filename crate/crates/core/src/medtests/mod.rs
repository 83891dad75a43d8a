//! Mediation tests: Sobel, MaxP, the single-split studentized subsampling
//! test, Cauchy combination, and the full CSMT pipeline.

mod cauchy;
mod csmt;
mod partition;
mod sobel;
mod subsample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::regress::Dataset;

pub use cauchy::{cauchy_combine, generate_weights, normalize_weights, WeightScheme};
pub use csmt::{csmt, csmt_with, CsmtOptions, DEFAULT_M};
pub use partition::{choose_k, make_partition, Partition};
pub use sobel::{maxp_test, sobel_statistic, sobel_test};
pub use subsample::{studentized_statistic, subsampling_t_test, Studentized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sobel,
    #[serde(rename = "maxp")]
    MaxP,
    SubsamplingT,
    Csmt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Csmt, Method::SubsamplingT, Method::Sobel, Method::MaxP];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sobel => "sobel",
            Method::MaxP => "maxp",
            Method::SubsamplingT => "subsampling_t",
            Method::Csmt => "csmt",
        }
    }

    /// Whether the method draws random splits.
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::SubsamplingT | Method::Csmt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sobel" => Ok(Method::Sobel),
            "maxp" => Ok(Method::MaxP),
            "subsampling_t" | "subsampling-t" | "t" => Ok(Method::SubsamplingT),
            "csmt" => Ok(Method::Csmt),
            other => Err(Error::config("", format!("unknown method `{other}`"))),
        }
    }
}

/// Runs `method` on `ds`.
///
/// `src` is the per-dataset source; CSMT draws from `src.child(1)` and the
/// single-split test from `src.child(2)`, so adding or removing methods
/// leaves the others' randomness untouched.
pub fn run_method(method: Method, ds: &Dataset, opts: &CsmtOptions, src: &RandomSource) -> Result<TestResult> {
    match method {
        Method::Sobel => sobel_test(ds),
        Method::MaxP => maxp_test(ds),
        Method::SubsamplingT => subsampling_t_test(ds, opts.k, &src.child(2)),
        Method::Csmt => csmt_with(ds, opts, &src.child(1)),
    }
}

/// Method-specific diagnostics carried by a [`TestResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detail {
    Sobel {
        t_alpha: f64,
        t_beta: f64,
    },
    MaxP {
        p_alpha: f64,
        p_beta: f64,
    },
    Subsampling {
        k: usize,
        /// Sobel statistic of each subsample, in group order.
        split_statistics: Vec<f64>,
        mean: f64,
        sd: f64,
        /// Re-randomizations spent on degenerate partitions (0 or 1).
        retries: u32,
    },
    Csmt {
        k: usize,
        m: usize,
        split_p_values: Vec<f64>,
        weight_scheme: WeightScheme,
        /// First 16 hex digits of SHA-256 over the little-endian weights.
        weights_digest: String,
        retries: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub detail: Detail,
}

/// The four hypothesis configurations of `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HypothesisType {
    /// `alpha = beta = 0`
    H00,
    /// `alpha = 0`, `beta != 0`
    H01,
    /// `alpha != 0`, `beta = 0`
    H10,
    /// Both nonzero; mediation present.
    H11,
}

impl HypothesisType {
    pub fn is_null(self) -> bool {
        self != HypothesisType::H11
    }
}

/// Limiting law `N(0, variance_factor)` of the Sobel statistic under one of
/// the three null configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticNull {
    pub null_type: HypothesisType,
    pub variance_factor: f64,
}

impl AsymptoticNull {
    /// `None` for [`HypothesisType::H11`], which is not a null.
    pub fn for_null(null_type: HypothesisType) -> Option<Self> {
        let variance_factor = match null_type {
            HypothesisType::H00 => 0.25,
            HypothesisType::H01 | HypothesisType::H10 => 1.0,
            HypothesisType::H11 => return None,
        };
        Some(Self {
            null_type,
            variance_factor,
        })
    }

    pub fn sd(&self) -> f64 {
        self.variance_factor.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("abtest".parse::<Method>().is_err());
    }

    #[test]
    fn asymptotic_null_scales() {
        assert_eq!(AsymptoticNull::for_null(HypothesisType::H00).unwrap().variance_factor, 0.25);
        assert_eq!(AsymptoticNull::for_null(HypothesisType::H01).unwrap().variance_factor, 1.0);
        assert_eq!(AsymptoticNull::for_null(HypothesisType::H10).unwrap().sd(), 1.0);
        assert!(AsymptoticNull::for_null(HypothesisType::H11).is_none());
    }
}
