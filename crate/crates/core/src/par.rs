//! Index-ordered batch evaluation.
//!
//! With the `parallel` feature (on by default) [`map_range`] fans out over
//! rayon's pool; without it, it runs the sequential loop. Results are always
//! returned in index order, so reductions over them are deterministic no
//! matter how the work was scheduled.

/// Evaluate `f(0..n)` and collect the results in index order.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Evaluate `f(0..n)` and collect the results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_range_sequential(n, f)
}

/// Sequential reference path, always available (used by the benches).
pub fn map_range_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Whether [`map_range`] runs on the rayon pool in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
