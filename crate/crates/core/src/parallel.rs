//! Read-only evaluation fan-out, capped by `LMC_THREADS` (0 = serial).

use rayon::prelude::*;

pub const THREADS_ENV: &str = "LMC_THREADS";

/// Worker cap from `LMC_THREADS`; unset means rayon's default, 0 means serial.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

/// Maps `f` over `items`, preserving order. Falls back to a serial loop when
/// the cap is 0 or the pool cannot be built.
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match thread_cap() {
        Some(0) => items.iter().map(&f).collect(),
        cap => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = cap {
                builder = builder.num_threads(n);
            }
            match builder.build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(&f).collect(),
            }
        }
    }
}
