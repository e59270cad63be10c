//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) work fans out through rayon; without
//! it the same API runs a plain loop. Results come back in index order either
//! way, so downstream output is identical regardless of feature or thread
//! count.

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Always-sequential reference path; the bench suite compares this against
/// [`map_indexed`].
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Run `f` inside a pool of `workers` threads (rayon builds); `None` uses the
/// global pool. Without the `parallel` feature the worker count is ignored.
#[cfg(feature = "parallel")]
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    F: FnOnce() -> R,
{
    let _ = workers;
    f()
}
