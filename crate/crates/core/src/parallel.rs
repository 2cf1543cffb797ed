//! Ordered fan-out of independent replica tasks.

use rayon::prelude::*;

/// Runs `task(i)` for `i in 0..count` on `workers` threads and returns the
/// results in index order, so reductions over the output do not depend on
/// scheduling.
pub fn map_replicas<T, F>(workers: usize, count: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || count <= 1 {
        return (0..count).map(task).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..count).into_par_iter().map(&task).collect())
}
