//! The two structural-equation regressions.
//!
//! `fit_alpha` regresses the mediator on (intercept, covariates, exposure) and
//! reports the exposure coefficient. `fit_beta` regresses the outcome on
//! (intercept, covariates, exposure, mediator) and reports the mediator
//! coefficient. Both use classical homoscedastic OLS standard errors.
//!
//! The solver is a Householder QR of the design with the coefficient of
//! interest placed in the last column. With that ordering the last row of
//! `R^{-1}` has a single nonzero entry, so the estimate is `(Q'y)_p / R_pp`
//! and its standard error is `sigma / |R_pp|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest-to-largest singular value ratio below which a design is singular.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Residual variance at or below this multiple of the response variance is a
/// degenerate fit.
pub const DEGENERATE_RESIDUAL_RATIO: f64 = 1e-12;

/// Exposure `s`, mediator `g`, outcome `y` and `q >= 0` covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    s: Vec<f64>,
    g: Vec<f64>,
    y: Vec<f64>,
    covariates: Vec<Vec<f64>>,
    covariate_names: Vec<String>,
    row_ids: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset; `covariates` holds one vector per covariate column.
    pub fn new(s: Vec<f64>, g: Vec<f64>, y: Vec<f64>, covariates: Vec<Vec<f64>>) -> Result<Self> {
        let n = s.len();
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no rows".into()));
        }
        if g.len() != n || y.len() != n {
            return Err(Error::Domain(format!(
                "column lengths differ: s={}, g={}, y={}",
                n,
                g.len(),
                y.len()
            )));
        }
        for (name, col) in [("s", &s), ("g", &g), ("y", &y)] {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in column {name} at row {i}")));
            }
        }
        for (j, col) in covariates.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Domain(format!(
                    "covariate {j} has length {}, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in covariate {j} at row {i}")));
            }
        }
        let covariate_names = (1..=covariates.len()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            s,
            g,
            y,
            covariates,
            covariate_names,
            row_ids: None,
        })
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.covariates.len() {
            return Err(Error::Domain(format!(
                "{} covariate names for {} covariates",
                names.len(),
                self.covariates.len()
            )));
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::Domain(format!("{} row ids for {} rows", ids.len(), self.n())));
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// Number of covariate columns.
    pub fn q(&self) -> usize {
        self.covariates.len()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    /// The rows at `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            s: pick(&self.s),
            g: pick(&self.g),
            y: pick(&self.y),
            covariates: self.covariates.iter().map(|c| pick(c)).collect(),
            covariate_names: self.covariate_names.clone(),
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    /// Replaces the mediator column, keeping everything else.
    pub fn with_mediator(mut self, g: Vec<f64>) -> Result<Self> {
        if g.len() != self.n() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("replacement mediator must be finite with n entries".into()));
        }
        self.g = g;
        Ok(self)
    }

    /// Replaces the outcome column, keeping everything else.
    pub fn with_outcome(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("replacement outcome must be finite with n entries".into()));
        }
        self.y = y;
        Ok(self)
    }
}

/// Which structural coefficient a fit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    /// Exposure effect on the mediator.
    Alpha,
    /// Mediator effect on the outcome, given the exposure.
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub target: Coefficient,
    pub estimate: f64,
    /// Finite-sample standard error, so `t_stat = estimate / std_error`.
    pub std_error: f64,
    pub t_stat: f64,
    pub df_residual: usize,
}

pub fn fit_alpha(ds: &Dataset) -> Result<RegressionFit> {
    fit_alpha_impl(ds, None)
}

pub fn fit_beta(ds: &Dataset) -> Result<RegressionFit> {
    fit_beta_impl(ds, None)
}

/// [`fit_alpha`] on the given row subset, without copying the dataset.
pub fn fit_alpha_on(ds: &Dataset, rows: &[usize]) -> Result<RegressionFit> {
    fit_alpha_impl(ds, Some(rows))
}

/// [`fit_beta`] on the given row subset, without copying the dataset.
pub fn fit_beta_on(ds: &Dataset, rows: &[usize]) -> Result<RegressionFit> {
    fit_beta_impl(ds, Some(rows))
}

/// Both fits from a single factorization, optionally on a row subset.
///
/// The outcome design `[1, X, S, G]` extends the mediator design `[1, X, S]`
/// by one column, so the first `q + 2` Householder reflections serve both
/// regressions. Results are bit-identical to separate [`fit_alpha`] and
/// [`fit_beta`] calls, and errors are reported in the same order.
pub fn fit_pair(ds: &Dataset, rows: Option<&[usize]>) -> Result<(RegressionFit, RegressionFit)> {
    let (a, b) = fit_impl(ds, rows, Mode::Both)?;
    Ok((a.expect("alpha computed"), b.expect("beta computed")))
}

fn fit_alpha_impl(ds: &Dataset, rows: Option<&[usize]>) -> Result<RegressionFit> {
    Ok(fit_impl(ds, rows, Mode::Alpha)?.0.expect("alpha computed"))
}

fn fit_beta_impl(ds: &Dataset, rows: Option<&[usize]>) -> Result<RegressionFit> {
    Ok(fit_impl(ds, rows, Mode::Beta)?.1.expect("beta computed"))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Alpha,
    Beta,
    Both,
}

type FitPair = (Option<RegressionFit>, Option<RegressionFit>);

fn fit_impl(ds: &Dataset, rows: Option<&[usize]>, mode: Mode) -> Result<FitPair> {
    let with_beta = mode != Mode::Alpha;
    let n = rows.map_or(ds.n(), <[usize]>::len);
    let q = ds.q();
    // [1, covariates, s] for alpha; beta appends g.
    let p_alpha = q + 2;
    let p_beta = q + 3;
    let check_rows = |p: usize, what: &str| {
        if n < p + 1 {
            Err(Error::InsufficientData(format!(
                "{what} regression with {q} covariates needs at least {} rows, got {n}",
                p + 1
            )))
        } else {
            Ok(())
        }
    };
    if mode == Mode::Beta {
        check_rows(p_beta, "outcome")?;
    } else {
        check_rows(p_alpha, "mediator")?;
    }

    let gather = |col: &[f64], out: &mut Vec<f64>| match rows {
        Some(r) => out.extend(r.iter().map(|&i| col[i])),
        None => out.extend_from_slice(col),
    };

    // Column-major [1, X, S, G]; the g column doubles as the alpha response.
    let mut a = Vec::with_capacity(n * p_beta);
    a.resize(n, 1.0);
    for c in &ds.covariates {
        gather(c, &mut a);
    }
    gather(&ds.s, &mut a);
    gather(&ds.g, &mut a);
    let mut y = Vec::with_capacity(n);
    if with_beta {
        gather(&ds.y, &mut y);
    }
    let var_g = if mode == Mode::Beta {
        0.0
    } else {
        sample_variance(&a[p_alpha * n..])
    };
    let var_y = sample_variance(&y);

    householder_steps(&mut a, &mut y, n, p_beta, 0..p_alpha);
    let alpha = match mode {
        Mode::Beta => None,
        _ => Some(finish_fit(&a, &a[p_alpha * n..], n, p_alpha, var_g, Coefficient::Alpha)?),
    };
    if !with_beta {
        return Ok((alpha, None));
    }

    check_rows(p_beta, "outcome")?;
    householder_steps(&mut a, &mut y, n, p_beta, p_alpha..p_beta);
    let beta = finish_fit(&a, &y, n, p_beta, var_y, Coefficient::Beta)?;
    Ok((alpha, Some(beta)))
}

/// Reads the last coefficient of a `p`-column fit off the factorized leading
/// block of `a` and the transformed response `qty`.
fn finish_fit(
    a: &[f64],
    qty: &[f64],
    n: usize,
    p: usize,
    resp_var: f64,
    target: Coefficient,
) -> Result<RegressionFit> {
    if !certainly_well_conditioned(a, n, p) {
        let sv = triangular_singular_values(a, n, p);
        let (smin, smax) = sv
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(smax > 0.0) || smin < RANK_TOLERANCE * smax {
            return Err(Error::SingularDesign(format!(
                "design matrix is rank deficient (singular value ratio {:.3e})",
                if smax > 0.0 { smin / smax } else { 0.0 }
            )));
        }
    }

    let df_residual = n - p;
    let sse: f64 = qty[p..].iter().map(|v| v * v).sum();
    let sigma2 = sse / df_residual as f64;
    if sigma2 <= DEGENERATE_RESIDUAL_RATIO * resp_var {
        return Err(Error::DegenerateFit(format!(
            "residual variance {sigma2:.3e} is negligible against response variance {resp_var:.3e}"
        )));
    }

    let r_pp = a[(p - 1) * n + (p - 1)];
    let estimate = qty[p - 1] / r_pp;
    let std_error = sigma2.sqrt() / r_pp.abs();
    Ok(RegressionFit {
        target,
        estimate,
        std_error,
        t_stat: estimate / std_error,
        df_residual,
    })
}

fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64
}

/// Applies the Householder reflections for columns `cols` of the column-major
/// `n x p` matrix `a`, updating the later columns of `a` and the vector `b`
/// (which may be empty). After all `p` columns the upper triangle of `a` is
/// `R` and `b` holds `Q'b`.
fn householder_steps(a: &mut [f64], b: &mut [f64], n: usize, p: usize, cols: std::ops::Range<usize>) {
    for j in cols {
        let (done, rest) = a.split_at_mut((j + 1) * n);
        let v = &mut done[j * n + j..(j + 1) * n];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = -norm.copysign(v[0]);
        v[0] -= alpha;
        let vtv = v.iter().map(|x| x * x).sum::<f64>();
        if vtv == 0.0 {
            v[0] = alpha;
            continue;
        }
        let scale = 2.0 / vtv;
        for k in 0..p - j - 1 {
            let col = &mut rest[k * n + j..(k + 1) * n];
            let s = scale * dot(v, col);
            col.iter_mut().zip(v.iter()).for_each(|(c, vi)| *c -= s * vi);
        }
        if !b.is_empty() {
            let tail = &mut b[j..];
            let s = scale * dot(v, tail);
            tail.iter_mut().zip(v.iter()).for_each(|(c, vi)| *c -= s * vi);
        }
        v[0] = alpha;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Cheap sufficient test that `smin / smax >= RANK_TOLERANCE` for the upper
/// triangle `R`: `smax <= |R|_F` and `smin >= 1 / |R^-1|_F`. When this
/// returns false the exact singular values decide.
fn certainly_well_conditioned(a: &[f64], n: usize, p: usize) -> bool {
    let r = |i: usize, j: usize| a[j * n + i];
    let mut fro_r = 0.0;
    for j in 0..p {
        for i in 0..=j {
            fro_r += r(i, j) * r(i, j);
        }
    }
    // Column j of R^-1 by back substitution on e_j.
    let mut fro_inv = 0.0;
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.fill(0.0);
        for i in (0..=j).rev() {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for k in i + 1..=j {
                acc -= r(i, k) * col[k];
            }
            let d = r(i, i);
            if d == 0.0 {
                return false;
            }
            col[i] = acc / d;
            fro_inv += col[i] * col[i];
        }
    }
    let bound = 1.0 / (fro_r.sqrt() * fro_inv.sqrt());
    bound.is_finite() && bound >= RANK_TOLERANCE
}

/// Singular values of the `p x p` upper triangle stored in column-major `a`
/// (leading dimension `n`), by one-sided Jacobi rotations.
fn triangular_singular_values(a: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut u = vec![0.0; p * p];
    for j in 0..p {
        for i in 0..=j {
            u[j * p + i] = a[j * n + i];
        }
    }
    for _sweep in 0..64 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let (ci, cj) = (&u[i * p..(i + 1) * p], &u[j * p..(j + 1) * p]);
                let alpha = dot(ci, ci);
                let beta = dot(cj, cj);
                let gamma = dot(ci, cj);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..p {
                    let x = u[i * p + r];
                    let y = u[j * p + r];
                    u[i * p + r] = c * x - s * y;
                    u[j * p + r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..p)
        .map(|j| dot(&u[j * p..(j + 1) * p], &u[j * p..(j + 1) * p]).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ds(s: &[f64], g: &[f64], y: &[f64]) -> Dataset {
        Dataset::new(s.to_vec(), g.to_vec(), y.to_vec(), vec![]).unwrap()
    }

    #[test]
    fn hand_solved_alpha() {
        let d = ds(&[0., 0., 1., 1.], &[1., 3., 2., 4.], &[0.; 4]);
        let fit = fit_alpha(&d).unwrap();
        assert_abs_diff_eq!(fit.estimate, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.std_error, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.t_stat, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(fit.df_residual, 2);
        assert_eq!(fit.t_stat, fit.estimate / fit.std_error);
    }

    #[test]
    fn constant_mediator_is_degenerate() {
        let d = ds(&[0., 0., 1., 1.], &[2., 2., 2., 2.], &[0.; 4]);
        assert!(matches!(fit_alpha(&d), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn constant_exposure_is_singular() {
        let d = ds(&[1., 1., 1., 1.], &[1., 3., 2., 4.], &[0.; 4]);
        assert!(matches!(fit_alpha(&d), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn too_few_rows() {
        let d = ds(&[0., 1.], &[1., 2.], &[0., 1.]);
        assert!(matches!(fit_alpha(&d), Err(Error::InsufficientData(_))));
        let d = ds(&[0., 1., 0.], &[1., 2., 4.], &[0., 1., 3.]);
        assert!(matches!(fit_beta(&d), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn mediator_collinear_with_exposure_is_singular() {
        let s = [0., 1., 0., 1., 1., 0.];
        let g: Vec<f64> = s.iter().map(|v| 3.0 * v - 1.0).collect();
        let d = ds(&s, &g, &[0.3, 1.0, -0.2, 0.8, 2.0, 0.1]);
        assert!(matches!(fit_beta(&d), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn exact_outcome_fit_is_degenerate() {
        // y = 2 g exactly; covariates and exposure carry zero weight.
        let s = [0., 1., 0., 1., 1.];
        let x = vec![0.1, 0.7, 0.3, 0.2, 0.9];
        let g = [1.0, -0.5, 2.0, 0.25, 1.5];
        let y: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        let d = Dataset::new(s.to_vec(), g.to_vec(), y, vec![x]).unwrap();
        assert!(matches!(fit_beta(&d), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn location_shift_of_exposure_is_invisible() {
        let s = [0., 1., 1., 0., 1., 0., 0., 1.];
        let g = [0.2, 1.4, 0.9, -0.3, 2.2, 0.5, 0.1, 1.1];
        let y = [1.0, 0.4, 0.7, 0.2, 1.9, 1.2, -0.4, 0.8];
        let a = fit_alpha(&ds(&s, &g, &y)).unwrap();
        let shifted: Vec<f64> = s.iter().map(|v| v + 7.5).collect();
        let b = fit_alpha(&ds(&shifted, &g, &y)).unwrap();
        assert_abs_diff_eq!(a.estimate, b.estimate, epsilon = 1e-12);
        assert_abs_diff_eq!(a.std_error, b.std_error, epsilon = 1e-12);
        assert_abs_diff_eq!(a.t_stat, b.t_stat, epsilon = 1e-12);
    }

    #[test]
    fn subset_fit_matches_materialized_subset() {
        let s = [0., 1., 1., 0., 1., 0., 0., 1., 1., 0.];
        let g = [0.2, 1.4, 0.9, -0.3, 2.2, 0.5, 0.1, 1.1, 0.0, 0.6];
        let y = [1.0, 0.4, 0.7, 0.2, 1.9, 1.2, -0.4, 0.8, 0.3, 0.3];
        let d = ds(&s, &g, &y);
        let rows = [9, 0, 3, 4, 7, 1, 2];
        assert_eq!(fit_beta_on(&d, &rows).unwrap(), fit_beta(&d.select_rows(&rows)).unwrap());
        assert_eq!(fit_alpha_on(&d, &rows).unwrap(), fit_alpha(&d.select_rows(&rows)).unwrap());
    }

    #[test]
    fn joint_fit_is_bit_identical() {
        let s = [0., 1., 1., 0., 1., 0., 0., 1., 1., 0.];
        let g = [0.2, 1.4, 0.9, -0.3, 2.2, 0.5, 0.1, 1.1, 0.0, 0.6];
        let y = [1.0, 0.4, 0.7, 0.2, 1.9, 1.2, -0.4, 0.8, 0.3, 0.3];
        let x = vec![0.3, 0.1, 0.9, 0.5, 0.2, 0.8, 0.6, 0.4, 0.7, 0.05];
        let d = Dataset::new(s.to_vec(), g.to_vec(), y.to_vec(), vec![x]).unwrap();
        let (a, b) = fit_pair(&d, None).unwrap();
        assert_eq!(a, fit_alpha(&d).unwrap());
        assert_eq!(b, fit_beta(&d).unwrap());
        assert_eq!(a.target, Coefficient::Alpha);
        assert_eq!(b.target, Coefficient::Beta);
    }

    #[test]
    fn near_collinear_exposure_is_singular() {
        // s differs from a constant only at the 1e-12 level.
        let s = [1.0, 1.0 + 1e-12, 1.0, 1.0 - 1e-12, 1.0, 1.0];
        let d = ds(&s, &[0.3, 1.0, -0.2, 0.8, 2.0, 0.1], &[0.0; 6]);
        assert!(matches!(fit_alpha(&d), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn screen_agrees_with_singular_values() {
        let mut st = crate::distributions::RandomSource::new(12).stream();
        for scale in [1.0, 1e-4, 1e-8, 1e-11, 1e-13] {
            let n = 12;
            let p = 3;
            let mut a: Vec<f64> = (0..n * p).map(|_| st.normal()).collect();
            // Make the last column nearly a copy of the first.
            for i in 0..n {
                a[2 * n + i] = a[i] + scale * a[2 * n + i];
            }
            householder_steps(&mut a, &mut [], n, p, 0..p);
            let sv = triangular_singular_values(&a, n, p);
            let ratio = sv.iter().cloned().fold(f64::INFINITY, f64::min)
                / sv.iter().cloned().fold(0.0, f64::max);
            if certainly_well_conditioned(&a, n, p) {
                assert!(ratio >= RANK_TOLERANCE, "scale {scale}: screen passed ratio {ratio}");
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], vec![], vec![], vec![]).is_err());
        assert!(Dataset::new(vec![1.0], vec![1.0, 2.0], vec![1.0], vec![]).is_err());
        assert!(Dataset::new(vec![f64::NAN], vec![1.0], vec![1.0], vec![]).is_err());
        assert!(Dataset::new(vec![1.0], vec![1.0], vec![1.0], vec![vec![]]).is_err());
    }
}
