//! Thin switch between rayon and sequential iteration.
//!
//! Every parallel loop in the crate goes through [`map_indexed`] so that the
//! `parallel` feature can be turned off without touching call sites. Results
//! are always returned in index order, which keeps outputs independent of the
//! worker count.

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STELLAR_WITNESS_THREADS";

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    init_pool();
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

/// Sequential version of [`map_indexed`], used by benches and as a reference.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Number of workers the parallel backend will use.
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        init_pool();
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(feature = "parallel")]
fn init_pool() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            // Fails only if a global pool already exists; the existing one is kept.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}
