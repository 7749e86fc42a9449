//! Order-preserving parallel evaluation over path indices.

use rayon::prelude::*;

/// Environment variable that fixes the worker count of the global pool.
pub const THREADS_ENV: &str = "SHRINKLAB_THREADS";

/// Configure the global rayon pool from [`THREADS_ENV`] if it is set.
/// Calling this more than once is harmless.
pub fn init_pool_from_env() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// `f(0), f(1), ..., f(n-1)` evaluated in parallel, returned in index order.
///
/// Each call must depend only on its index (one random stream per path),
/// so the result does not depend on scheduling.
pub fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Serial counterpart of [`map_paths`], for checking order independence.
pub fn map_paths_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n as u64).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{RngStream, TimeGrid};
    use crate::path::gen_brownian;

    #[test]
    fn parallel_equals_serial() {
        let g = TimeGrid::new(1.0, 200).unwrap();
        let f = |i: u64| gen_brownian(&g, &RngStream::new(5, i)).last();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let par = pool.install(|| map_paths(64, f));
        assert_eq!(par, map_paths_serial(64, f));
    }
}
