use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{clamp_probability, RandomSource};
use crate::error::{Error, Result};
use crate::medtests::{choose_k, run_method, CsmtOptions, HypothesisType, Method, WeightScheme, DEFAULT_M};

use super::{generate_dataset, NullMixture, Nuisance, SimulationParams};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Recorded in every report: the model never fixes the exposure law.
pub const EXPOSURE_DESIGN: &str = "bernoulli(0.5)";

const SIZE_STREAM: u64 = 0;
const POWER_STREAM: u64 = 1;

/// Everything about a simulation study except the hypothesis layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub n: usize,
    pub n_tests: usize,
    pub methods: Vec<Method>,
    pub level: f64,
    /// Subsamples per partition; `None` means `choose_k(n)`.
    pub k: Option<usize>,
    pub m: usize,
    pub weights: WeightScheme,
    pub nuisance: Nuisance,
}

impl ExperimentSettings {
    /// CSMT, Sobel and MaxP at the 5% level with `M = 500` and automatic `K`.
    pub fn new(n: usize, n_tests: usize) -> Self {
        Self {
            n,
            n_tests,
            methods: vec![Method::Csmt, Method::Sobel, Method::MaxP],
            level: 0.05,
            k: None,
            m: DEFAULT_M,
            weights: WeightScheme::Random,
            nuisance: Nuisance::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::config("/n", format!("n = {} is below the minimum of 16", self.n)));
        }
        if self.n_tests == 0 {
            return Err(Error::config("/n_tests", "need at least one test"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("/methods", "no methods selected"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("/level", format!("{} is not in (0, 1)", self.level)));
        }
        if self.m == 0 {
            return Err(Error::config("/m", "need at least one partition"));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::config("/k", "K must be at least 2"));
            }
        }
        self.nuisance.validate()
    }

    pub fn resolved_k(&self) -> Result<usize> {
        match self.k {
            Some(k) => Ok(k),
            None => choose_k(self.n),
        }
    }

    fn csmt_options(&self) -> Result<CsmtOptions> {
        Ok(CsmtOptions {
            k: self.resolved_k()?,
            m: self.m,
            weights: self.weights,
        })
    }
}

/// The two power regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case", deny_unknown_fields)]
pub enum PowerScenario {
    /// `alpha = beta = v` for each listed `v`.
    FixedEqual { values: Vec<f64> },
    /// Fixed product `alpha * beta`, varying ratio `alpha / beta`. Without an
    /// explicit product, n = 100, 200, 300 map to 0.3, 0.2, 0.1.
    FixedProduct {
        ratios: Vec<f64>,
        #[serde(default)]
        product: Option<f64>,
    },
}

/// One `(alpha, beta)` setting of a power grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub ratio: Option<f64>,
    pub product: Option<f64>,
}

impl PowerScenario {
    pub fn paper_product(n: usize) -> Option<f64> {
        match n {
            100 => Some(0.3),
            200 => Some(0.2),
            300 => Some(0.1),
            _ => None,
        }
    }

    /// Solves `alpha * beta = product`, `alpha / beta = ratio` for the
    /// positive roots.
    pub fn solve_product(product: f64, ratio: f64) -> (f64, f64) {
        let beta = (product / ratio).sqrt();
        (ratio * beta, beta)
    }

    pub fn grid(&self, n: usize) -> Result<Vec<GridPoint>> {
        match self {
            PowerScenario::FixedEqual { values } => {
                if values.is_empty() {
                    return Err(Error::config("/power/values", "grid is empty"));
                }
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if v.is_finite() {
                            Ok(GridPoint {
                                alpha: v,
                                beta: v,
                                ratio: None,
                                product: None,
                            })
                        } else {
                            Err(Error::config(format!("/power/values/{i}"), "value must be finite"))
                        }
                    })
                    .collect()
            }
            PowerScenario::FixedProduct { ratios, product } => {
                if ratios.is_empty() {
                    return Err(Error::config("/power/ratios", "grid is empty"));
                }
                let c = match product.or_else(|| Self::paper_product(n)) {
                    Some(c) if c.is_finite() && c > 0.0 => c,
                    Some(c) => return Err(Error::config("/power/product", format!("{c} must be positive"))),
                    None => {
                        return Err(Error::config(
                            "/power/product",
                            format!("no default product for n = {n}; set one explicitly"),
                        ))
                    }
                };
                ratios
                    .iter()
                    .enumerate()
                    .map(|(i, &rho)| {
                        if !(rho.is_finite() && rho > 0.0) {
                            return Err(Error::config(format!("/power/ratios/{i}"), "ratio must be positive"));
                        }
                        let (alpha, beta) = Self::solve_product(c, rho);
                        Ok(GridPoint {
                            alpha,
                            beta,
                            ratio: Some(rho),
                            product: Some(c),
                        })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Size,
    Power,
}

/// A QQ pair on the `-log10` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    /// `-log10` of the uniform plotting position `i / (N + 1)`.
    pub expected: f64,
    /// `-log10` of the i-th smallest p-value.
    pub observed: f64,
}

/// QQ pairs against the uniform law, sorted by increasing `expected`
/// (so also increasing `observed`).
pub fn qq_points(p_values: &[f64]) -> Vec<QqPoint> {
    let mut sorted: Vec<f64> = p_values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let big_n = sorted.len() as f64;
    let len = sorted.len();
    sorted
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            // j = 0 holds the largest p-value, rank N.
            let rank = (len - j) as f64;
            QqPoint {
                expected: -(rank / (big_n + 1.0)).log10(),
                observed: -clamp_probability(p).log10(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// One p-value per test, in test order.
    pub p_values: Vec<f64>,
    pub qq: Vec<QqPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Common `(alpha, beta)` of every test; absent for size mixtures.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub ratio: Option<f64>,
    pub product: Option<f64>,
    /// Per-type test counts for size mixtures.
    pub hypothesis_counts: Option<BTreeMap<HypothesisType, usize>>,
    /// Hypothesis type of each test for size mixtures, in test order.
    pub hypotheses: Vec<HypothesisType>,
    pub methods: Vec<MethodSummary>,
}

impl PointReport {
    pub fn rate(&self, method: Method) -> Option<f64> {
        self.methods
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.rejection_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub level: f64,
    /// `-log10(level)`, the reference line of QQ plots.
    pub reference_line: f64,
    pub exposure_design: String,
    pub settings: ExperimentSettings,
    pub mixture: Option<NullMixture>,
    pub power: Option<PowerScenario>,
    pub points: Vec<PointReport>,
}

/// Runs every method on one dataset per `(alpha, beta)` pair, test `t`
/// drawing from `root.child(t)`.
fn run_tests(
    coefficients: &[(f64, f64)],
    settings: &ExperimentSettings,
    root: &RandomSource,
) -> Result<Vec<Vec<f64>>> {
    let opts = settings.csmt_options()?;
    coefficients
        .par_iter()
        .enumerate()
        .map(|(t, &(alpha, beta))| {
            let params = SimulationParams {
                alpha,
                beta,
                nuisance: settings.nuisance,
                n: settings.n,
            };
            let test_src = root.child(t as u64);
            let run = || -> Result<Vec<f64>> {
                let ds = generate_dataset(&params, &test_src.child(0))?;
                settings
                    .methods
                    .iter()
                    .map(|&m| run_method(m, &ds, &opts, &test_src).map(|r| r.p_value))
                    .collect()
            };
            run().map_err(|e| Error::Test {
                index: t,
                source: Box::new(e),
            })
        })
        .collect()
}

fn summarize(settings: &ExperimentSettings, per_test: &[Vec<f64>]) -> Vec<MethodSummary> {
    settings
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let p_values: Vec<f64> = per_test.iter().map(|row| row[j]).collect();
            let rejections = p_values.iter().filter(|&&p| p <= settings.level).count();
            MethodSummary {
                method,
                rejections,
                rejection_rate: rejections as f64 / p_values.len() as f64,
                qq: qq_points(&p_values),
                p_values,
            }
        })
        .collect()
}

/// Empirical size under a null mixture.
///
/// Each of `settings.n_tests` tests is assigned a hypothesis type with exact
/// largest-remainder counts and gets its own dataset. Test `t` uses the
/// substream `(0, t)` of `src`.
pub fn run_size_experiment(
    mix: &NullMixture,
    settings: &ExperimentSettings,
    src: &RandomSource,
) -> Result<ExperimentReport> {
    settings.validate()?;
    mix.validate()?;
    if mix.pi_11 > 0.0 {
        return Err(Error::config(
            "/mixture/pi_11",
            "a size experiment cannot include non-null tests",
        ));
    }
    let hypotheses = mix.assignments(settings.n_tests);
    let coefficients: Vec<(f64, f64)> = hypotheses.iter().map(|&h| mix.coefficients(h)).collect();
    let per_test = run_tests(&coefficients, settings, &src.child(SIZE_STREAM))?;

    let counts = mix.counts(settings.n_tests);
    let hypothesis_counts = [
        HypothesisType::H00,
        HypothesisType::H01,
        HypothesisType::H10,
        HypothesisType::H11,
    ]
    .into_iter()
    .zip(counts)
    .collect();

    let point = PointReport {
        label: format!("size r={}", mix.r),
        n: settings.n,
        k: settings.resolved_k()?,
        m: settings.m,
        alpha: None,
        beta: None,
        ratio: None,
        product: None,
        hypothesis_counts: Some(hypothesis_counts),
        hypotheses,
        methods: summarize(settings, &per_test),
    };
    Ok(report(ExperimentKind::Size, settings, src, Some(*mix), None, vec![point]))
}

/// Empirical power over a grid of `(alpha, beta)` settings. Grid point `g`,
/// test `t` uses the substream `(1, g, t)` of `src`.
pub fn run_power_experiment(
    scenario: &PowerScenario,
    settings: &ExperimentSettings,
    src: &RandomSource,
) -> Result<ExperimentReport> {
    settings.validate()?;
    let grid = scenario.grid(settings.n)?;
    let k = settings.resolved_k()?;
    let root = src.child(POWER_STREAM);
    let mut points = Vec::with_capacity(grid.len());
    for (g, gp) in grid.iter().enumerate() {
        let coefficients = vec![(gp.alpha, gp.beta); settings.n_tests];
        let per_test = run_tests(&coefficients, settings, &root.child(g as u64))?;
        let label = match gp.ratio {
            Some(rho) => format!("ratio={rho} product={}", gp.product.unwrap_or(f64::NAN)),
            None => format!("alpha=beta={}", gp.alpha),
        };
        points.push(PointReport {
            label,
            n: settings.n,
            k,
            m: settings.m,
            alpha: Some(gp.alpha),
            beta: Some(gp.beta),
            ratio: gp.ratio,
            product: gp.product,
            hypothesis_counts: None,
            hypotheses: Vec::new(),
            methods: summarize(settings, &per_test),
        });
    }
    Ok(report(
        ExperimentKind::Power,
        settings,
        src,
        None,
        Some(scenario.clone()),
        points,
    ))
}

fn report(
    kind: ExperimentKind,
    settings: &ExperimentSettings,
    src: &RandomSource,
    mixture: Option<NullMixture>,
    power: Option<PowerScenario>,
    points: Vec<PointReport>,
) -> ExperimentReport {
    ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind,
        master_seed: src.master_seed(),
        level: settings.level,
        reference_line: -settings.level.log10(),
        exposure_design: EXPOSURE_DESIGN.into(),
        settings: settings.clone(),
        mixture,
        power,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_tests: usize) -> ExperimentSettings {
        let mut s = ExperimentSettings::new(100, n_tests);
        s.m = 10;
        s
    }

    #[test]
    fn product_parameterization() {
        let (a, b) = PowerScenario::solve_product(0.3, 1.0);
        assert!((a - 0.3f64.sqrt()).abs() < 1e-15 && (b - 0.3f64.sqrt()).abs() < 1e-15);
        let (a, b) = PowerScenario::solve_product(0.2, 4.0);
        assert!((a * b - 0.2).abs() < 1e-15 && (a / b - 4.0).abs() < 1e-14);
        let grid = PowerScenario::FixedProduct {
            ratios: vec![0.5, 2.0],
            product: None,
        }
        .grid(200)
        .unwrap();
        assert!(grid.iter().all(|g| g.product == Some(0.2)));
    }

    #[test]
    fn invalid_grids() {
        let bad = [
            (PowerScenario::FixedEqual { values: vec![] }, 100, "/power/values"),
            (
                PowerScenario::FixedProduct {
                    ratios: vec![1.0, -2.0],
                    product: None,
                },
                100,
                "/power/ratios/1",
            ),
            (
                PowerScenario::FixedProduct {
                    ratios: vec![1.0],
                    product: None,
                },
                150,
                "/power/product",
            ),
        ];
        for (scenario, n, path) in bad {
            match scenario.grid(n) {
                Err(Error::Config { path: p, .. }) => assert_eq!(p, path),
                other => panic!("expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn qq_is_sorted_and_log_scaled() {
        let qq = qq_points(&[0.5, 0.01, 0.2, 1.0]);
        assert_eq!(qq.len(), 4);
        assert!(qq.windows(2).all(|w| w[0].expected <= w[1].expected && w[0].observed <= w[1].observed));
        assert!((qq[3].observed - 2.0).abs() < 1e-12);
        assert!((qq[3].expected - -(0.2f64).log10()).abs() < 1e-12);
        assert!(qq[0].observed.abs() < 1e-12);
    }

    #[test]
    fn size_report_shape_and_determinism() {
        let settings = small(12);
        let mix = NullMixture::dense(0.3);
        let src = RandomSource::new(5);
        let a = run_size_experiment(&mix, &settings, &src).unwrap();
        let b = run_size_experiment(&mix, &settings, &src).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let point = &a.points[0];
        assert_eq!(point.k, 5);
        assert_eq!(point.methods.len(), 3);
        assert!(point.methods.iter().all(|m| m.p_values.len() == 12));
        assert_eq!(point.hypotheses.len(), 12);
        assert!((a.reference_line - 1.3010299956639813).abs() < 1e-15);
    }

    #[test]
    fn size_rejects_alternatives() {
        let mut mix = NullMixture::dense(0.3);
        mix.pi_00 = 0.3;
        mix.pi_11 = 0.1;
        let err = run_size_experiment(&mix, &small(4), &RandomSource::new(0)).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "/mixture/pi_11"));
    }

    #[test]
    fn method_failures_carry_the_test_index() {
        // K = 50 leaves two rows per subsample.
        let mut settings = small(3);
        settings.k = Some(50);
        let err = run_size_experiment(&NullMixture::dense(0.1), &settings, &RandomSource::new(0)).unwrap_err();
        assert!(matches!(err, Error::Test { index, .. } if index < 3), "{err}");
    }

    #[test]
    fn power_points_follow_grid() {
        let scenario = PowerScenario::FixedEqual {
            values: vec![0.0, 0.5],
        };
        let r = run_power_experiment(&scenario, &small(6), &RandomSource::new(3)).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.points[1].alpha, Some(0.5));
        assert_eq!(r.kind, ExperimentKind::Power);
    }
}
