//! Distributional checks of the null behaviour: the Sobel statistic against
//! its `N(0, tau)` limit and the studentized statistic against `t_{K-1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{normal_cdf, student_t_cdf, RandomSource};
use crate::error::{Error, Result};
use crate::medtests::{sobel_statistic, studentized_statistic, AsymptoticNull, HypothesisType};
use crate::regress::fit_pair;

use super::{generate_dataset, SimulationParams};

/// One-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value with the Stephens small-sample correction.
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov distribution survival function `Q(lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = f64::from(j);
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let nf = n as f64;
    let d = x.iter().enumerate().fold(0.0_f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf)
    });
    let sn = nf.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
        n,
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobelCalibration {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub replications: usize,
    pub null_type: HypothesisType,
    /// Standard deviation of the limiting normal law.
    pub reference_sd: f64,
    pub empirical_mean: f64,
    pub empirical_sd: f64,
    pub ks: KsResult,
    pub level: f64,
    /// Fraction of replications with Sobel p-value at or below `level`.
    pub sobel_size: f64,
    /// Same for MaxP.
    pub maxp_size: f64,
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Simulates the Sobel statistic under a null configuration of `params`.
/// Replication `r` draws its dataset from `src.child(r)`.
pub fn calibrate_sobel(
    params: &SimulationParams,
    replications: usize,
    level: f64,
    src: &RandomSource,
) -> Result<SobelCalibration> {
    params.validate()?;
    if replications < 2 {
        return Err(Error::config("/replications", "need at least two replications"));
    }
    let null_type = match (params.alpha == 0.0, params.beta == 0.0) {
        (true, true) => HypothesisType::H00,
        (true, false) => HypothesisType::H01,
        (false, true) => HypothesisType::H10,
        (false, false) => {
            return Err(Error::config("", "calibration needs alpha = 0 or beta = 0"));
        }
    };
    let reference_sd = AsymptoticNull::for_null(null_type).map_or(1.0, |a| a.sd());

    let per_rep: Vec<(f64, f64, f64)> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let ds = generate_dataset(params, &src.child(r))?;
            let (a, b) = fit_pair(&ds, None)?;
            let s = sobel_statistic(a.t_stat, b.t_stat);
            let sobel_p = crate::distributions::normal_two_sided(s);
            let maxp_p = crate::distributions::normal_two_sided(a.t_stat)
                .max(crate::distributions::normal_two_sided(b.t_stat));
            Ok((s, sobel_p, maxp_p))
        })
        .collect::<Result<_>>()?;

    let statistics: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let rate = |f: fn(&(f64, f64, f64)) -> f64| {
        per_rep.iter().filter(|r| f(r) <= level).count() as f64 / replications as f64
    };
    let (empirical_mean, empirical_sd) = mean_sd(&statistics);
    let ks = ks_test(&statistics, |x| normal_cdf(x / reference_sd).unwrap_or(f64::NAN));
    Ok(SobelCalibration {
        alpha: params.alpha,
        beta: params.beta,
        n: params.n,
        replications,
        null_type,
        reference_sd,
        empirical_mean,
        empirical_sd,
        ks,
        level,
        sobel_size: rate(|r| r.1),
        maxp_size: rate(|r| r.2),
        statistics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentizedCalibration {
    pub k: usize,
    pub variance_factor: f64,
    pub draws: usize,
    pub ks: KsResult,
}

/// Feeds `k` i.i.d. `N(0, variance_factor)` values through the studentized
/// statistic `draws` times and compares the result with `t_{k-1}`.
pub fn calibrate_studentized(
    k: usize,
    variance_factor: f64,
    draws: usize,
    src: &RandomSource,
) -> Result<StudentizedCalibration> {
    if k < 2 {
        return Err(Error::config("/k", "K must be at least 2"));
    }
    if !(variance_factor > 0.0 && variance_factor.is_finite()) {
        return Err(Error::config("/variance_factor", "must be positive"));
    }
    let sd = variance_factor.sqrt();
    let mut st = src.stream();
    let mut buf = vec![0.0; k];
    let mut stats = Vec::with_capacity(draws);
    for _ in 0..draws {
        buf.iter_mut().for_each(|v| *v = sd * st.normal());
        stats.push(studentized_statistic(&buf)?.statistic);
    }
    let df = (k - 1) as u32;
    let ks = ks_test(&stats, |x| student_t_cdf(x, df).unwrap_or(f64::NAN));
    Ok(StudentizedCalibration {
        k,
        variance_factor,
        draws,
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // Classical critical values: Q(1.358) ~ 0.05, Q(1.628) ~ 0.01.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift() {
        let x: Vec<f64> = crate::distributions::draw_normal(&RandomSource::new(1), 2000);
        let ok = ks_test(&x, |v| normal_cdf(v).unwrap());
        let shifted = ks_test(&x, |v| normal_cdf(v - 0.2).unwrap());
        assert!(ok.p_value > 0.01);
        assert!(shifted.p_value < 1e-6);
    }

    #[test]
    fn alternatives_are_not_calibrated() {
        let p = SimulationParams::new(0.2, 0.2, 100);
        assert!(calibrate_sobel(&p, 10, 0.05, &RandomSource::new(0)).is_err());
    }
}
