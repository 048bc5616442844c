//! Feature-gated data parallelism.
//!
//! Work is always expressed as `map an index range, then combine the results
//! in index order`. With the `parallel` feature the map runs on the current
//! rayon pool; without it the same closures run on one thread. Because the
//! combine order is fixed by the index and never by the schedule, both paths
//! return identical results and repeated runs are deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every index in `0..count` and returns the results in index
/// order, using the rayon pool when available.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T: Send>(count: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T>(count: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Caps the process-global worker pool at `count` threads. Effective once
/// per process; a second call with a different count fails because the pool
/// is already built.
#[cfg(feature = "parallel")]
pub fn configure_threads(count: usize) -> crate::error::Result<()> {
    if count == 0 {
        return Err(crate::error::Error::Config(
            "thread count must be at least 1".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| crate::error::Error::Config(format!("cannot size the worker pool: {e}")))
}

/// Without the `parallel` feature there is exactly one worker; any request
/// other than 1 is reported rather than silently ignored.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(count: usize) -> crate::error::Result<()> {
    if count == 0 {
        return Err(crate::error::Error::Config(
            "thread count must be at least 1".into(),
        ));
    }
    if count != 1 {
        log::warn!("built without the parallel feature; running on 1 thread, not {count}");
    }
    Ok(())
}
