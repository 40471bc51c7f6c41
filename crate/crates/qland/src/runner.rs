//! Trial execution on a worker pool.

use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Evaluates `f(0..n)` on `workers` threads (0: one per core) and returns
/// the results in index order.
pub fn ordered_map<T, F>(workers: usize, n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}
