use crate::distributions::{t_two_sided, RandomSource, Stream};
use crate::error::{Error, Result};
use crate::regress::{fit_pair, Dataset};

use super::partition::partition_from_stream;
use super::sobel::sobel_statistic;
use super::{Detail, Method, TestResult};

/// One-sample t-statistic of per-split Sobel values and its two-sided
/// `t_{K-1}` p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Studentized {
    pub statistic: f64,
    pub p_value: f64,
    pub mean: f64,
    /// Sample standard deviation with the `K - 1` divisor.
    pub sd: f64,
}

/// Studentizes `K >= 2` per-split statistics:
/// `sqrt(K) * mean / sd`, referred to `t_{K-1}`.
pub fn studentized_statistic(values: &[f64]) -> Result<Studentized> {
    let k = values.len();
    if k < 2 {
        return Err(Error::Domain(format!("need at least two split statistics, got {k}")));
    }
    let kf = k as f64;
    let mean = values.iter().sum::<f64>() / kf;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let sd = (ss / (kf - 1.0)).sqrt();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(sd > 8.0 * f64::EPSILON * scale) {
        return Err(Error::DegenerateStatistic(
            "per-split statistics have zero spread".into(),
        ));
    }
    let statistic = kf.sqrt() * mean / sd;
    Ok(Studentized {
        statistic,
        p_value: t_two_sided(statistic, (k - 1) as u32),
        mean,
        sd,
    })
}

pub(crate) struct SplitOutcome {
    pub studentized: Studentized,
    pub split_statistics: Vec<f64>,
    pub retries: u32,
}

/// Sobel statistics on each group of one random partition.
fn split_statistics(ds: &Dataset, k: usize, stream: &mut Stream) -> Result<Vec<f64>> {
    let partition = partition_from_stream(ds.n(), k, stream)?;
    let need = ds.q() + 4;
    if let Some((i, g)) = partition.groups().iter().enumerate().find(|(_, g)| g.len() < need) {
        return Err(Error::InsufficientData(format!(
            "subsample {} of {k} has {} rows; the outcome regression with {} covariates needs {need}",
            i + 1,
            g.len(),
            ds.q()
        )));
    }
    partition
        .groups()
        .iter()
        .map(|rows| {
            let (a, b) = fit_pair(ds, Some(rows))?;
            Ok(sobel_statistic(a.t_stat, b.t_stat))
        })
        .collect()
}

/// One studentized split drawn from `src`. A degenerate partition (singular
/// subsample design, vanishing residuals, or zero spread) is redrawn once from
/// the same stream; a second failure is an error.
pub(crate) fn studentized_split(ds: &Dataset, k: usize, src: &RandomSource) -> Result<SplitOutcome> {
    let mut stream = src.stream();
    let mut first_failure = None;
    for retries in 0..2 {
        let attempt = split_statistics(ds, k, &mut stream)
            .and_then(|stats| studentized_statistic(&stats).map(|s| (s, stats)));
        match attempt {
            Ok((studentized, split_statistics)) => {
                return Ok(SplitOutcome {
                    studentized,
                    split_statistics,
                    retries,
                })
            }
            Err(e) if e.is_degenerate() => first_failure = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateStatistic(format!(
        "split degenerate after one retry: {}",
        first_failure.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Single-split subsampling test: partition into `k` groups, compute the Sobel
/// statistic on each, and studentize.
pub fn subsampling_t_test(ds: &Dataset, k: usize, src: &RandomSource) -> Result<TestResult> {
    let out = studentized_split(ds, k, src)?;
    Ok(TestResult {
        method: Method::SubsamplingT,
        statistic: out.studentized.statistic,
        p_value: out.studentized.p_value,
        detail: Detail::Subsampling {
            k,
            split_statistics: out.split_statistics,
            mean: out.studentized.mean,
            sd: out.studentized.sd,
            retries: out.retries,
        },
    })
}
