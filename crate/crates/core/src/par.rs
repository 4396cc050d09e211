//! Data-parallel map used by sweeps and population experiments.
//!
//! With the `parallel` feature the work runs on a rayon pool of `jobs`
//! threads (0 = rayon default); without it, or with `jobs == 1`, it runs in
//! order on the calling thread. Results are always returned in input order.

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let run = || items.par_iter().map(&f).collect();
    if jobs == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// True when the crate was built with the rayon backend.
pub const PARALLEL: bool = cfg!(feature = "parallel");
