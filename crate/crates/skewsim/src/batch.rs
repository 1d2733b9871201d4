//! Deterministic batch driver.
//!
//! The contract every estimator leans on: the per-path closure is a pure
//! function of its path index (randomness comes from counter streams keyed by
//! `(seed, path index, step index)`), results are collected in path-index
//! order, and every reduction runs sequentially over that ordered vector.
//! Worker count therefore changes wall-clock time only, never a single bit of
//! output. With the `parallel` feature disabled the same code runs on one
//! thread.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Run on the calling thread.
    Sequential,
    /// Spread path indices over the active worker pool.
    Parallel,
}

/// Maps `f` over path indices `0..n_paths`, preserving index order.
pub fn run_batch<T, F>(n_paths: u64, par: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match par {
        Parallelism::Sequential => (0..n_paths).map(f).collect(),
        Parallelism::Parallel => run_parallel(n_paths, f),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel<T, F>(n_paths: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_paths).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, F>(n_paths: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths).map(f).collect()
}

/// Runs `body` inside a scoped pool of `workers` threads (0 = library
/// default). Without the `parallel` feature the body just runs inline.
pub fn with_worker_pool<R, F>(workers: usize, body: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return body();
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
            .install(body)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        body()
    }
}
