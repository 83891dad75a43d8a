//! Normal, Student-t and Cauchy laws, plus the seeded random-source contract.
//!
//! The Student-t CDF goes through the regularized incomplete beta function,
//! evaluated with a Lentz continued fraction; the normal CDF goes through
//! `erfc`. Tail probabilities are computed directly rather than as `1 - cdf`
//! so that small p-values keep their relative precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lower clamp applied to p-values before `tan`/`log` transforms.
pub const P_CLAMP_MIN: f64 = 1e-15;
/// Upper clamp applied to p-values before `tan`/`log` transforms.
pub const P_CLAMP_MAX: f64 = 1.0 - 1e-15;

const BETA_CF_MAX_ITER: usize = 20_000;
const BETA_CF_EPS: f64 = 1e-16;
const BETA_CF_TINY: f64 = 1e-300;

fn finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {x}")))
    }
}

fn open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

fn positive_df(df: u32) -> Result<()> {
    if df >= 1 {
        Ok(())
    } else {
        Err(Error::Domain("degrees of freedom must be at least 1".into()))
    }
}

/// Clamps a probability into `[P_CLAMP_MIN, P_CLAMP_MAX]`.
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(P_CLAMP_MIN, P_CLAMP_MAX)
}

// ---------------------------------------------------------------------------
// Normal

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> Result<f64> {
    finite(x, "x")?;
    Ok(phi(x))
}

/// Standard normal survival function `P(Z > x)`.
pub fn normal_sf(x: f64) -> Result<f64> {
    finite(x, "x")?;
    Ok(phi(-x))
}

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Two-sided normal-reference p-value `2 P(Z > |z|)`.
#[inline]
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    (2.0 * phi(-z.abs())).min(1.0)
}

/// Standard normal quantile.
///
/// Rational initial approximation (Acklam) polished with one Halley step on
/// the `erfc`-based CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    open_unit(p)?;
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let mut x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };

    // Halley refinement against whichever tail is small.
    let e = if p < 0.5 {
        phi(x) - p
    } else {
        (1.0 - p) - phi(-x)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

// ---------------------------------------------------------------------------
// Incomplete beta

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`, taking `y = 1 - x` separately so
/// callers that know the complement exactly do not lose it to rounding.
pub(crate) fn beta_reg(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_reg_cf(b, a, y, x)
    } else {
        beta_reg_cf(a, b, x, y)
    }
}

/// Continued fraction for `I_x(a, b)` (modified Lentz), valid for
/// `x < (a + 1) / (a + b + 2)`.
fn beta_reg_cf(a: f64, b: f64, x: f64, y: f64) -> f64 {
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < BETA_CF_TINY { BETA_CF_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= BETA_CF_EPS {
            break;
        }
    }
    front * h
}

// ---------------------------------------------------------------------------
// Student t

/// Upper tail `P(T > t)` for `t >= 0`.
fn t_upper_tail(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    if !t2.is_finite() {
        return 0.0;
    }
    let denom = df + t2;
    0.5 * beta_reg(0.5 * df, 0.5, df / denom, t2 / denom)
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm = libm::lgamma(0.5 * (df + 1.0)) - libm::lgamma(0.5 * df) - 0.5 * (df * PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (t * t / df).ln_1p()).exp()
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(x: f64, df: u32) -> Result<f64> {
    positive_df(df)?;
    finite(x, "x")?;
    Ok(t_cdf(x, df))
}

/// Student-t survival function `P(T > x)`.
pub fn student_t_sf(x: f64, df: u32) -> Result<f64> {
    positive_df(df)?;
    finite(x, "x")?;
    Ok(t_cdf(-x, df))
}

#[inline]
fn t_cdf(x: f64, df: u32) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let tail = t_upper_tail(x.abs(), f64::from(df));
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| > |t|)`.
#[inline]
pub(crate) fn t_two_sided(t: f64, df: u32) -> f64 {
    (2.0 * t_upper_tail(t.abs(), f64::from(df))).min(1.0)
}

/// Student-t quantile.
///
/// Closed forms for one and two degrees of freedom; otherwise a bracketed
/// Newton iteration on the upper tail.
pub fn student_t_quantile(p: f64, df: u32) -> Result<f64> {
    positive_df(df)?;
    open_unit(p)?;
    // 1 - p is exact for p >= 0.5.
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    if q == 0.5 {
        return Ok(0.0);
    }
    Ok(sign * t_upper_quantile(q, df))
}

/// Solves `P(T > t) = q` for `t > 0`, `0 < q < 0.5`.
fn t_upper_quantile(q: f64, df: u32) -> f64 {
    match df {
        1 => return 1.0 / (PI * q).tan(),
        2 => {
            let u = 1.0 - 2.0 * q;
            return u * (2.0 / (4.0 * q * (1.0 - q))).sqrt();
        }
        _ => {}
    }
    let nu = f64::from(df);

    // Cornish-Fisher start from the normal quantile.
    let z = -normal_quantile(q).unwrap_or(0.0);
    let g1 = (z.powi(3) + z) / 4.0;
    let g2 = (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / 96.0;
    let mut t = (z + g1 / nu + g2 / (nu * nu)).max(f64::MIN_POSITIVE);

    let mut lo = 0.0;
    let mut hi = t.max(1.0);
    while t_upper_tail(hi, nu) > q {
        lo = hi;
        hi *= 2.0;
    }
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let resid = t_upper_tail(t, nu) - q;
        if resid > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t + resid / t_pdf(t, nu);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - t).abs() <= 4.0 * f64::EPSILON * next.abs() || hi - lo <= f64::EPSILON * hi;
        t = next;
        if done {
            break;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Cauchy

/// Standard Cauchy CDF, `0.5 + atan(x) / pi`.
pub fn cauchy_cdf(x: f64) -> Result<f64> {
    finite(x, "x")?;
    Ok(0.5 + x.atan() / PI)
}

/// Standard Cauchy survival function, `0.5 - atan(x) / pi`.
pub fn cauchy_sf(x: f64) -> Result<f64> {
    finite(x, "x")?;
    Ok(0.5 - x.atan() / PI)
}

/// Standard Cauchy quantile, `tan(pi (p - 0.5))`.
pub fn cauchy_quantile(p: f64) -> Result<f64> {
    open_unit(p)?;
    Ok((PI * (p - 0.5)).tan())
}

// ---------------------------------------------------------------------------
// Random sources

/// A reproducible random stream identified by a master seed and a key path.
///
/// The generator is ChaCha12 seeded with SHA-256 of the master seed and the
/// key path, so `(master_seed, stream_key)` alone fixes the draws on every
/// platform and at every thread count. Children extend the key path, which is
/// how replication `t`, split `m` and so on get their own substreams.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    master_seed: u64,
    stream_key: Vec<u64>,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_key: Vec::new(),
        }
    }

    pub fn with_key(master_seed: u64, stream_key: &[u64]) -> Self {
        Self {
            master_seed,
            stream_key: stream_key.to_vec(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_key(&self) -> &[u64] {
        &self.stream_key
    }

    /// The substream with `index` appended to this key path.
    pub fn child(&self, index: u64) -> Self {
        let mut stream_key = Vec::with_capacity(self.stream_key.len() + 1);
        stream_key.extend_from_slice(&self.stream_key);
        stream_key.push(index);
        Self {
            master_seed: self.master_seed,
            stream_key,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn stream(&self) -> Stream {
        let mut hasher = Sha256::new();
        hasher.update(b"csmt.random-source.v1");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update((self.stream_key.len() as u64).to_le_bytes());
        for k in &self.stream_key {
            hasher.update(k.to_le_bytes());
        }
        let seed: [u8; 32] = hasher.finalize().into();
        Stream(ChaCha12Rng::from_seed(seed))
    }
}

/// Draw sequence of one [`RandomSource`].
#[derive(Debug, Clone)]
pub struct Stream(ChaCha12Rng);

impl Stream {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn bernoulli_half(&mut self) -> bool {
        self.uniform() < 0.5
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.0);
        idx
    }

    /// `amount` distinct values from `0..len`, uniformly at random.
    pub fn choose_distinct(&mut self, len: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.0, len, amount).into_vec()
    }
}

pub fn draw_uniform(src: &RandomSource, n: usize) -> Vec<f64> {
    let mut s = src.stream();
    (0..n).map(|_| s.uniform()).collect()
}

pub fn draw_normal(src: &RandomSource, n: usize) -> Vec<f64> {
    let mut s = src.stream();
    (0..n).map(|_| s.normal()).collect()
}

pub fn draw_permutation(src: &RandomSource, n: usize) -> Vec<usize> {
    src.stream().permutation(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_reference_points() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(normal_cdf(1.959964).unwrap(), 0.975, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_cdf(-1.959964).unwrap(), 0.025, epsilon = 1e-6);
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.025, 0.3, 0.5, 0.8, 0.975, 1.0 - 1e-9] {
            let x = normal_quantile(p).unwrap();
            let back = if p < 0.5 { phi(x) } else { 1.0 - phi(-x) };
            assert!((back - p).abs() <= 1e-12 * p.max(1e-3), "p={p} back={back}");
        }
        assert!(normal_quantile(0.0).is_err());
    }

    #[test]
    fn t_reference_points() {
        assert_abs_diff_eq!(student_t_cdf(1.0, 1).unwrap(), 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(student_t_cdf(3.4641, 2).unwrap(), 0.96291, epsilon = 1e-4);
        for df in [1, 3, 30, 1000] {
            assert_eq!(student_t_cdf(0.0, df).unwrap(), 0.5);
        }
        assert!(student_t_cdf(1.0, 0).is_err());
        assert!(student_t_cdf(f64::NAN, 3).is_err());
    }

    #[test]
    fn t_quantile_reference_points() {
        assert_eq!(student_t_quantile(0.5, 7).unwrap(), 0.0);
        assert_abs_diff_eq!(student_t_quantile(0.975, 11).unwrap(), 2.2010, epsilon = 5e-4);
        assert_abs_diff_eq!(student_t_quantile(0.75, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert!(student_t_quantile(1.0, 3).is_err());
        assert!(student_t_quantile(0.0, 3).is_err());
        assert!(student_t_quantile(0.3, 0).is_err());
    }

    #[test]
    fn t_approaches_normal_for_huge_df() {
        for &x in &[-3.0, -1.0, 0.3, 1.96, 2.5] {
            let t = student_t_cdf(x, 1_000_000).unwrap();
            assert_abs_diff_eq!(t, normal_cdf(x).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn cauchy_reference_points() {
        assert_eq!(cauchy_sf(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(cauchy_sf(1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(cauchy_quantile(0.95).unwrap(), 6.3138, epsilon = 1e-3);
        assert!(cauchy_quantile(1.0).is_err());
        assert!(cauchy_sf(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn clamp_bounds() {
        assert_eq!(clamp_probability(0.0), P_CLAMP_MIN);
        assert_eq!(clamp_probability(1.0), P_CLAMP_MAX);
        assert_eq!(clamp_probability(0.3), 0.3);
    }

    #[test]
    fn permutation_of_one_is_identity() {
        assert_eq!(draw_permutation(&RandomSource::new(9), 1), vec![0]);
    }

    #[test]
    fn uniform_moments() {
        let u = draw_uniform(&RandomSource::with_key(11, &[1]), 1_000_000);
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
        assert!(u.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn normal_moments() {
        let z = draw_normal(&RandomSource::with_key(11, &[2]), 1_000_000);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn streams_are_keyed() {
        let a = RandomSource::with_key(5, &[1, 2]);
        assert_eq!(draw_uniform(&a, 8), draw_uniform(&a.clone(), 8));
        assert_eq!(a, RandomSource::with_key(5, &[1]).child(2));
        assert_ne!(draw_uniform(&a, 8), draw_uniform(&RandomSource::with_key(5, &[2, 1]), 8));
        assert_ne!(draw_uniform(&a, 8), draw_uniform(&RandomSource::with_key(6, &[1, 2]), 8));
        // A key path is not a prefix-collision of a longer one.
        assert_ne!(
            draw_uniform(&RandomSource::with_key(5, &[]), 8),
            draw_uniform(&RandomSource::with_key(5, &[0]), 8)
        );
    }
}
