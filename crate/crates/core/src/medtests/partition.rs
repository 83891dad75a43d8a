use serde::{Deserialize, Serialize};

use crate::distributions::{RandomSource, Stream};
use crate::error::{Error, Result};

/// A disjoint cover of the row indices `0..n` by `k` nonempty groups whose
/// sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Checks every structural invariant; used by tests and after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::Domain("partition needs at least two groups".into()));
        }
        let mut seen = vec![false; self.n];
        for g in &self.groups {
            if g.is_empty() {
                return Err(Error::Domain("empty group".into()));
            }
            for &i in g {
                if i >= self.n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Domain(format!("row {i} out of range or repeated")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("groups do not cover all rows".into()));
        }
        let sizes = self.sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(Error::Domain(format!("group sizes range from {lo} to {hi}")));
        }
        Ok(())
    }
}

/// Randomly partitions `0..n` into `k` groups.
///
/// Rows are permuted uniformly; every group gets `n / k` rows and the
/// `n % k` leftover rows go one each to distinct, randomly chosen groups.
pub fn make_partition(n: usize, k: usize, src: &RandomSource) -> Result<Partition> {
    partition_from_stream(n, k, &mut src.stream())
}

pub(crate) fn partition_from_stream(n: usize, k: usize, stream: &mut Stream) -> Result<Partition> {
    if k < 2 || k > n / 2 {
        return Err(Error::Domain(format!(
            "group count {k} must satisfy 2 <= k <= n/2 = {}",
            n / 2
        )));
    }
    let perm = stream.permutation(n);
    let base = n / k;
    let leftover = n - base * k;
    let mut extra = vec![false; k];
    for g in stream.choose_distinct(k, leftover) {
        extra[g] = true;
    }
    let mut groups = Vec::with_capacity(k);
    let mut start = 0;
    for &e in &extra {
        let len = base + usize::from(e);
        groups.push(perm[start..start + len].to_vec());
        start += len;
    }
    debug_assert_eq!(start, n);
    Ok(Partition { groups, n })
}

/// Default subsample count `floor(0.5 sqrt(n))`.
pub fn choose_k(n: usize) -> Result<usize> {
    if n < 16 {
        return Err(Error::InsufficientData(format!(
            "n = {n} is too small: the subsample count floor(0.5 sqrt(n)) must be K >= 2, which needs n >= 16"
        )));
    }
    // floor(sqrt(n) / 2) == floor(isqrt(n) / 2)
    Ok(n.isqrt() / 2)
}
