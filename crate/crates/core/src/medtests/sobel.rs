use crate::distributions::normal_two_sided;
use crate::error::Result;
use crate::regress::{fit_pair, Dataset};

use super::{Detail, Method, TestResult};

/// Sobel statistic from the two t-statistics, `t_a t_b / sqrt(t_a^2 + t_b^2)`.
///
/// Defined as 0 when both inputs are 0.
pub fn sobel_statistic(t_alpha: f64, t_beta: f64) -> f64 {
    let r = t_alpha.hypot(t_beta);
    if r == 0.0 {
        return 0.0;
    }
    // Order by magnitude so the result is exactly symmetric in its
    // arguments; divide first so huge inputs do not overflow.
    let (lo, hi) = if t_alpha.abs() <= t_beta.abs() { (t_alpha, t_beta) } else { (t_beta, t_alpha) };
    (lo / r) * hi
}

/// Classical Sobel test with a two-sided `N(0, 1)` reference.
pub fn sobel_test(ds: &Dataset) -> Result<TestResult> {
    let (a, b) = fit_pair(ds, None)?;
    let statistic = sobel_statistic(a.t_stat, b.t_stat);
    Ok(TestResult {
        method: Method::Sobel,
        statistic,
        p_value: normal_two_sided(statistic),
        detail: Detail::Sobel {
            t_alpha: a.t_stat,
            t_beta: b.t_stat,
        },
    })
}

/// Joint-significance test: the larger of the two marginal two-sided
/// normal-reference p-values.
pub fn maxp_test(ds: &Dataset) -> Result<TestResult> {
    let (a, b) = fit_pair(ds, None)?;
    Ok(maxp_from_t(a.t_stat, b.t_stat))
}

pub(crate) fn maxp_from_t(t_alpha: f64, t_beta: f64) -> TestResult {
    let p_alpha = normal_two_sided(t_alpha);
    let p_beta = normal_two_sided(t_beta);
    let p = p_alpha.max(p_beta);
    TestResult {
        method: Method::MaxP,
        statistic: p,
        p_value: p,
        detail: Detail::MaxP { p_alpha, p_beta },
    }
}
