//! Size and power studies under the linear structural model
//!
//! ```text
//! G = alpha S + alpha0 + alpha1 X1 + alpha2 X2 + eps
//! Y = beta G + beta0 + beta1 X1 + beta2 X2 + tau S + e
//! ```
//!
//! with `X1, X2 ~ U(0, 1)`, `eps, e ~ N(0, 1)` and a binary exposure
//! `S ~ Bernoulli(1/2)`.

pub mod calibration;
mod experiment;

use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::medtests::HypothesisType;
use crate::regress::Dataset;

pub use experiment::{
    qq_points, run_power_experiment, run_size_experiment, ExperimentKind, ExperimentReport,
    ExperimentSettings, MethodSummary, PointReport, PowerScenario, QqPoint, EXPOSURE_DESIGN,
    REPORT_SCHEMA_VERSION,
};

/// Coefficients of the model other than `alpha` and `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nuisance {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Direct effect of the exposure on the outcome.
    pub tau_direct: f64,
}

impl Default for Nuisance {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            alpha1: 1.0,
            alpha2: 1.0,
            beta0: 0.5,
            beta1: 1.0,
            beta2: 1.0,
            tau_direct: 0.0,
        }
    }
}

impl Nuisance {
    fn validate(&self) -> Result<()> {
        let all = [
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.beta0,
            self.beta1,
            self.beta2,
            self.tau_direct,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("/nuisance", "coefficients must be finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(flatten)]
    pub nuisance: Nuisance,
    pub n: usize,
}

impl SimulationParams {
    /// Parameters with the default nuisance coefficients.
    pub fn new(alpha: f64, beta: f64, n: usize) -> Self {
        Self {
            alpha,
            beta,
            nuisance: Nuisance::default(),
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::config("/n", format!("n = {} is below the minimum of 16", self.n)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::config("", "alpha and beta must be finite"));
        }
        self.nuisance.validate()
    }
}

/// Raw random inputs of the structural model, one entry per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataComponents {
    pub s: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub eps: Vec<f64>,
    pub e: Vec<f64>,
}

impl DataComponents {
    /// Draws `n` rows: exposures, then `X1`, `X2`, `eps`, `e`, each as a block.
    pub fn draw(n: usize, src: &RandomSource) -> Self {
        let mut st = src.stream();
        let s = (0..n).map(|_| f64::from(u8::from(st.bernoulli_half()))).collect();
        let x1 = (0..n).map(|_| st.uniform()).collect();
        let x2 = (0..n).map(|_| st.uniform()).collect();
        let eps = (0..n).map(|_| st.normal()).collect();
        let e = (0..n).map(|_| st.normal()).collect();
        Self { s, x1, x2, eps, e }
    }
}

/// Evaluates the structural equations on given components. `params.n` is
/// ignored; the row count comes from the components.
pub fn build_dataset(params: &SimulationParams, c: &DataComponents) -> Result<Dataset> {
    let n = c.s.len();
    if [c.x1.len(), c.x2.len(), c.eps.len(), c.e.len()].iter().any(|&l| l != n) {
        return Err(Error::Domain("component vectors differ in length".into()));
    }
    let SimulationParams {
        alpha,
        beta,
        nuisance: nu,
        ..
    } = *params;
    let g: Vec<f64> = (0..n)
        .map(|i| alpha * c.s[i] + nu.alpha0 + nu.alpha1 * c.x1[i] + nu.alpha2 * c.x2[i] + c.eps[i])
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            beta * g[i] + nu.beta0 + nu.beta1 * c.x1[i] + nu.beta2 * c.x2[i] + nu.tau_direct * c.s[i] + c.e[i]
        })
        .collect();
    Dataset::new(c.s.clone(), g, y, vec![c.x1.clone(), c.x2.clone()])?
        .with_covariate_names(vec!["x1".into(), "x2".into()])
}

/// One simulated dataset.
pub fn generate_dataset(params: &SimulationParams, src: &RandomSource) -> Result<Dataset> {
    params.validate()?;
    build_dataset(params, &DataComponents::draw(params.n, src))
}

/// Proportions of the four hypothesis types and the signal magnitude `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullMixture {
    pub pi_00: f64,
    pub pi_01: f64,
    pub pi_10: f64,
    #[serde(default)]
    pub pi_11: f64,
    pub r: f64,
}

impl NullMixture {
    pub fn dense(r: f64) -> Self {
        Self {
            pi_00: 0.4,
            pi_01: 0.3,
            pi_10: 0.3,
            pi_11: 0.0,
            r,
        }
    }

    pub fn sparse(r: f64) -> Self {
        Self {
            pi_00: 0.8,
            pi_01: 0.1,
            pi_10: 0.1,
            pi_11: 0.0,
            r,
        }
    }

    fn proportions(&self) -> [f64; 4] {
        [self.pi_00, self.pi_01, self.pi_10, self.pi_11]
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["pi_00", "pi_01", "pi_10", "pi_11"];
        for (p, name) in self.proportions().iter().zip(names) {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::config(
                    format!("/mixture/{name}"),
                    format!("{p} is not a probability"),
                ));
            }
        }
        let total: f64 = self.proportions().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("/mixture", format!("proportions sum to {total}, not 1")));
        }
        if !self.r.is_finite() {
            return Err(Error::config("/mixture/r", "signal must be finite"));
        }
        Ok(())
    }

    /// Exact per-type test counts by largest-remainder rounding, in the order
    /// `H00, H01, H10, H11`. Ties go to the earlier type.
    pub fn counts(&self, n_tests: usize) -> [usize; 4] {
        let targets = self.proportions().map(|p| p * n_tests as f64);
        let mut counts = targets.map(|t| t.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let ra = targets[a] - targets[a].floor();
            let rb = targets[b] - targets[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(n_tests.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }

    /// Hypothesis type of each test, grouped by type.
    pub fn assignments(&self, n_tests: usize) -> Vec<HypothesisType> {
        let types = [
            HypothesisType::H00,
            HypothesisType::H01,
            HypothesisType::H10,
            HypothesisType::H11,
        ];
        self.counts(n_tests)
            .iter()
            .zip(types)
            .flat_map(|(&c, h)| std::iter::repeat_n(h, c))
            .collect()
    }

    /// `(alpha, beta)` for a hypothesis type at this signal magnitude.
    pub fn coefficients(&self, h: HypothesisType) -> (f64, f64) {
        match h {
            HypothesisType::H00 => (0.0, 0.0),
            HypothesisType::H01 => (0.0, self.r),
            HypothesisType::H10 => (self.r, 0.0),
            HypothesisType::H11 => (self.r, self.r),
        }
    }
}
