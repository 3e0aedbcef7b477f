//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work items run on the current rayon
//! pool; without it, or after `set_execution(Execution::Sequential)`, they run
//! in order on the calling thread. Results are always collected in index
//! order, so every caller sees the same output regardless of the path.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Process-wide switch between the rayon path and the sequential path.
///
/// Has no effect when the crate is built without the `parallel` feature.
pub fn set_execution(mode: Execution) {
    MODE.store(matches!(mode, Execution::Parallel) as u8, Ordering::SeqCst);
}

pub fn execution() -> Execution {
    if cfg!(feature = "parallel") && MODE.load(Ordering::SeqCst) == 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution() == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Parallel map over a slice, preserving order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

/// Runs `op` on a dedicated pool of `workers` threads (sequentially when the
/// `parallel` feature is off).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("failed to build worker pool");
        pool.install(op)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        op()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let out = with_workers(3, || map_indexed(1000, |i| i * i));
        assert!(out.iter().enumerate().all(|(i, v)| *v == i * i));
    }
}
