//! Shared oracles for the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use csmt::{Dataset, RandomSource};

fn exact(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite input")
}

/// OLS by exact rational arithmetic on the normal equations. `columns` are
/// the regressors (including any intercept column); returns the coefficient
/// and standard error of column `target`, or `None` when `X'X` is singular.
pub fn exact_ols(columns: &[Vec<f64>], y: &[f64], target: usize) -> Option<(f64, f64)> {
    let p = columns.len();
    let n = y.len();
    let xs: Vec<Vec<BigRational>> = columns.iter().map(|c| c.iter().map(|&v| exact(v)).collect()).collect();
    let ys: Vec<BigRational> = y.iter().map(|&v| exact(v)).collect();
    // Augmented [X'X | I | X'y].
    let mut a: Vec<Vec<BigRational>> = (0..p)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..p)
                .map(|j| (0..n).fold(BigRational::zero(), |s, r| s + &xs[i][r] * &xs[j][r]))
                .collect();
            row.extend((0..p).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            row.push((0..n).fold(BigRational::zero(), |s, r| s + &xs[i][r] * &ys[r]));
            row
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    let coef: Vec<BigRational> = (0..p).map(|i| a[i][2 * p].clone()).collect();
    let rss = (0..n).fold(BigRational::zero(), |s, r| {
        let fit = (0..p).fold(BigRational::zero(), |f, j| f + &coef[j] * &xs[j][r]);
        let e = &ys[r] - fit;
        s + &e * &e
    });
    let df = BigRational::from_integer(BigInt::from(n - p));
    let var = rss / df * &a[target][p + target];
    let se = var.abs().to_f64()?.sqrt();
    Some((coef[target].to_f64()?, se))
}

/// Exact alpha and beta fits of a dataset.
pub fn exact_pair(ds: &Dataset) -> Option<((f64, f64), (f64, f64))> {
    let ones = vec![1.0; ds.n()];
    let mut alpha_cols = vec![ones.clone(), ds.s().to_vec()];
    alpha_cols.extend(ds.covariates().iter().cloned());
    let mut beta_cols = vec![ones, ds.s().to_vec(), ds.g().to_vec()];
    beta_cols.extend(ds.covariates().iter().cloned());
    Some((exact_ols(&alpha_cols, ds.g(), 1)?, exact_ols(&beta_cols, ds.y(), 2)?))
}

/// A small random dataset with integer-valued exposure and `q` covariates.
pub fn random_dataset(n: usize, q: usize, seed: u64) -> Dataset {
    let mut st = RandomSource::new(seed).stream();
    let s: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let covariates: Vec<Vec<f64>> = (0..q).map(|_| (0..n).map(|_| st.uniform()).collect()).collect();
    let g: Vec<f64> = (0..n).map(|i| 0.3 * s[i] + st.normal()).collect();
    let y: Vec<f64> = (0..n).map(|i| 0.4 * g[i] + 0.2 * s[i] + st.normal()).collect();
    Dataset::new(s, g, y, covariates).unwrap()
}

/// Relative-or-absolute closeness.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
