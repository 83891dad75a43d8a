use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::{cauchy_sf, clamp_probability, RandomSource};
use crate::error::{Error, Result};

/// How the Cauchy combination weights its inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w_m = u_m / sum(u)` with `u_m ~ U(0, 1)`.
    #[default]
    Random,
    /// `w_m = 1 / M`, for ablations.
    Equal,
}

/// Normalizes non-negative raw weights to sum to one.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Domain("no weights".into()));
    }
    if raw.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(Error::Domain("weights must be finite and non-negative".into()));
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("weights sum to zero".into()));
    }
    Ok(raw.iter().map(|u| u / total).collect())
}

/// `m` random weights `u_i / sum(u)` from independent uniforms.
pub fn generate_weights(m: usize, src: &RandomSource) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Domain("weight count must be at least 1".into()));
    }
    let mut stream = src.stream();
    let mut raw: Vec<f64> = (0..m).map(|_| stream.uniform()).collect();
    // A zero draw has probability 2^-53 per value; an all-zero vector cannot
    // be normalized, so fall back to equal weights in that case only.
    if raw.iter().all(|&u| u == 0.0) {
        raw.fill(1.0);
    }
    normalize_weights(&raw)
}

pub(crate) fn scheme_weights(scheme: WeightScheme, m: usize, src: &RandomSource) -> Result<Vec<f64>> {
    match scheme {
        WeightScheme::Random => generate_weights(m, src),
        WeightScheme::Equal => normalize_weights(&vec![1.0; m]),
    }
}

pub(crate) fn weights_digest(weights: &[f64]) -> String {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.to_le_bytes());
    }
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Cauchy combination of p-values.
///
/// Returns `(C, p)` with `C = sum w_m tan(pi (0.5 - p_m))` over p-values
/// clamped to `[1e-15, 1 - 1e-15]`, and `p = 0.5 - atan(C) / pi`.
/// A single p-value with unit weight is returned unchanged, which is the
/// exact value of the round trip `tan` then `atan`.
pub fn cauchy_combine(p_values: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    if p_values.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} p-values but {} weights",
            p_values.len(),
            weights.len()
        )));
    }
    if p_values.is_empty() {
        return Err(Error::Domain("nothing to combine".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("p-value {p} outside [0, 1]")));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("weights must be non-negative and sum to one".into()));
    }

    let statistic: f64 = p_values
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w * (PI * (0.5 - clamp_probability(p))).tan())
        .sum();
    if p_values.len() == 1 && weights[0] == 1.0 {
        return Ok((statistic, p_values[0]));
    }
    Ok((statistic, cauchy_sf(statistic)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weight_examples() {
        assert_eq!(generate_weights(1, &RandomSource::new(4)).unwrap(), vec![1.0]);
        for m in [2, 17, 500] {
            let w = generate_weights(m, &RandomSource::new(m as u64)).unwrap();
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
        }
        let w = normalize_weights(&[0.2, 0.2, 0.3, 0.3]).unwrap();
        for (a, b) in w.iter().zip([0.2, 0.2, 0.3, 0.3]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(generate_weights(0, &RandomSource::new(0)).is_err());
        assert!(normalize_weights(&[0.0, 0.0]).is_err());
        assert!(normalize_weights(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn combine_examples() {
        let (c, p) = cauchy_combine(&[0.5; 4], &[0.25; 4]).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        let (c, p) = cauchy_combine(&[0.25], &[1.0]).unwrap();
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-15);
        assert_eq!(p, 0.25);

        let (c, p) = cauchy_combine(&[0.1, 0.9], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn combine_errors() {
        assert!(cauchy_combine(&[0.1, 0.2], &[1.0]).is_err());
        assert!(cauchy_combine(&[], &[]).is_err());
        assert!(cauchy_combine(&[0.1, 0.2], &[0.7, 0.7]).is_err());
        assert!(cauchy_combine(&[1.5], &[1.0]).is_err());
    }

    #[test]
    fn extreme_p_values_are_clamped() {
        let (c, p) = cauchy_combine(&[0.0, 1.0, 0.3], &[0.2, 0.3, 0.5]).unwrap();
        assert!(c.is_finite());
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn digest_is_stable() {
        let d = weights_digest(&[0.25, 0.75]);
        assert_eq!(d.len(), 16);
        assert_eq!(d, weights_digest(&[0.25, 0.75]));
        assert_ne!(d, weights_digest(&[0.75, 0.25]));
    }
}
