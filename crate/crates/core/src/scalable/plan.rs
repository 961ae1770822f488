use serde::{Deserialize, Serialize};

use crate::error::{PimError, Result};
use crate::rng;

/// Split of `n` rows into `partitions` pieces after a seeded shuffle.
///
/// All pieces have `partition_size` rows except the last, which takes
/// whatever remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub n: usize,
    pub partitions: usize,
    pub partition_size: usize,
    pub permutation_seed: u64,
}

impl PartitionPlan {
    /// `partitions` pieces of `⌊n / partitions⌋` rows, the last absorbing the
    /// remainder.
    pub fn new(n: usize, partitions: usize, permutation_seed: u64) -> Result<Self> {
        if partitions < 2 {
            return Err(PimError::Config(format!(
                "need at least 2 partitions, got {partitions}"
            )));
        }
        if partitions > n {
            return Err(PimError::Config(format!(
                "cannot split {n} rows into {partitions} partitions"
            )));
        }
        Ok(Self {
            n,
            partitions,
            partition_size: n / partitions,
            permutation_seed,
        })
    }

    /// Pieces of `partition_size` rows; the last holds the remaining
    /// `n − (S − 1)·partition_size` rows.
    pub fn with_partition_size(n: usize, partition_size: usize, permutation_seed: u64) -> Result<Self> {
        if partition_size == 0 {
            return Err(PimError::Config("partition size must be positive".into()));
        }
        let partitions = n.div_ceil(partition_size);
        if partitions < 2 {
            return Err(PimError::Config(format!(
                "partition size {partition_size} leaves a single partition of {n} rows"
            )));
        }
        Ok(Self {
            n,
            partitions,
            partition_size,
            permutation_seed,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.partition_size; self.partitions];
        sizes[self.partitions - 1] = self.n - (self.partitions - 1) * self.partition_size;
        sizes
    }

    pub fn smallest(&self) -> usize {
        self.sizes().into_iter().min().unwrap_or(0)
    }

    /// Row indices of every partition, each sorted ascending.
    pub fn realize(&self) -> Vec<Vec<usize>> {
        let mut rng = rng::stream(self.permutation_seed, &[]);
        let perm = rng::permutation(&mut rng, self.n);
        let mut pieces = Vec::with_capacity(self.partitions);
        let mut start = 0;
        for size in self.sizes() {
            let mut rows = perm[start..start + size].to_vec();
            rows.sort_unstable();
            pieces.push(rows);
            start += size;
        }
        pieces
    }
}

/// `b` independent uniform draws of `k` distinct rows each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub k: usize,
    pub b: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_large_k: bool,
}

impl SubsamplePlan {
    pub fn new(k: usize, b: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(PimError::Config(format!("subsample size must be at least 2, got {k}")));
        }
        if b < 2 {
            return Err(PimError::Config(format!(
                "need B ≥ 2 subsample iterations for a variance estimate, got {b}"
            )));
        }
        Ok(Self {
            k,
            b,
            seed,
            allow_large_k: false,
        })
    }

    /// Lifts the `K ≤ n/2` restriction, up to `K = n`. Intended for tests.
    pub fn allowing_large_k(mut self) -> Self {
        self.allow_large_k = true;
        self
    }

    pub fn check(&self, n: usize) -> Result<()> {
        let limit = if self.allow_large_k { n } else { n / 2 };
        if self.k > limit {
            return Err(PimError::Config(format!(
                "subsample size {} exceeds {} for n = {n}",
                self.k,
                if self.allow_large_k { "n" } else { "n/2" }
            )));
        }
        Ok(())
    }

    /// Rows of draw `iteration`, sorted ascending.
    pub fn draw(&self, n: usize, iteration: usize) -> Vec<usize> {
        let mut rng = rng::stream(self.seed, &[iteration as u64]);
        let mut rows = rng::sample_without_replacement(&mut rng, n, self.k);
        rows.sort_unstable();
        rows
    }
}
