use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::regress::Dataset;

use super::cauchy::{cauchy_combine, scheme_weights, weights_digest, WeightScheme};
use super::subsample::{studentized_split, SplitOutcome};
use super::{Detail, Method, TestResult};

/// Number of random partitions combined by default.
pub const DEFAULT_M: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsmtOptions {
    /// Subsamples per partition.
    pub k: usize,
    /// Number of independent partitions.
    pub m: usize,
    pub weights: WeightScheme,
}

/// Cauchy-combined studentized mediation test with random weights.
pub fn csmt(ds: &Dataset, k: usize, m: usize, src: &RandomSource) -> Result<TestResult> {
    csmt_with(
        ds,
        &CsmtOptions {
            k,
            m,
            weights: WeightScheme::Random,
        },
        src,
    )
}

/// Runs `m` independent studentized splits and Cauchy-combines their p-values.
///
/// Split `i` (1-based) is exactly [`super::subsampling_t_test`] on the
/// substream `src.child(i)`; the weights come from `src.child(m + 1)`. The
/// splits may run in parallel but are combined in index order, so the result
/// does not depend on scheduling.
pub fn csmt_with(ds: &Dataset, opts: &CsmtOptions, src: &RandomSource) -> Result<TestResult> {
    let CsmtOptions { k, m, weights } = *opts;
    if m == 0 {
        return Err(Error::Domain("CSMT needs at least one partition".into()));
    }
    let splits: Vec<SplitOutcome> = (1..=m as u64)
        .into_par_iter()
        .map(|i| studentized_split(ds, k, &src.child(i)))
        .collect::<Result<_>>()?;

    let split_p_values: Vec<f64> = splits.iter().map(|s| s.studentized.p_value).collect();
    let retries = splits.iter().map(|s| s.retries).sum();
    let w = scheme_weights(weights, m, &src.child(m as u64 + 1))?;
    let (statistic, p_value) = cauchy_combine(&split_p_values, &w)?;
    Ok(TestResult {
        method: Method::Csmt,
        statistic,
        p_value,
        detail: Detail::Csmt {
            k,
            m,
            split_p_values,
            weight_scheme: weights,
            weights_digest: weights_digest(&w),
            retries,
        },
    })
}
