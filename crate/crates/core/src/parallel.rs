//! Optional worker pool for row-parallel matrix products.
//!
//! The worker count comes from the `S2MLP_THREADS` environment variable
//! (`0`, the default, keeps everything sequential). Parallel rows are
//! computed independently with the same accumulation order, so results do
//! not depend on the worker count.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "S2MLP_THREADS";

static POOL: OnceLock<Option<ThreadPool>> = OnceLock::new();

fn requested_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

pub(crate) fn pool() -> Option<&'static ThreadPool> {
    POOL.get_or_init(|| match requested_threads() {
        0 => None,
        n => ThreadPoolBuilder::new().num_threads(n).build().ok(),
    })
    .as_ref()
}

/// Number of workers in use (0 when sequential).
pub fn worker_count() -> usize {
    pool().map_or(0, |p| p.current_num_threads())
}
