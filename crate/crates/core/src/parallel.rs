use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{PimError, Result};

/// Runs work on a pool of `workers` threads, or on rayon's global pool.
#[derive(Debug, Default)]
pub struct Executor {
    pool: Option<ThreadPool>,
}

impl Executor {
    /// `None` or `Some(0)` means the global pool (one thread per core).
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let pool = match workers {
            None | Some(0) => None,
            Some(w) => Some(
                ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| PimError::Config(format!("cannot start {w} workers: {e}")))?,
            ),
        };
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool
            .as_ref()
            .map_or_else(rayon::current_num_threads, ThreadPool::current_num_threads)
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}
