//! Data-parallel execution helpers.
//!
//! Bulk work in this crate (encrypting collections, scoring a query against
//! every database vector) is embarrassingly parallel: each item is a pure
//! function of its inputs. These helpers run such loops either sequentially
//! or on the rayon pool, selected at runtime. When the crate is built without
//! the `parallel` feature the rayon dependency disappears and
//! [`Parallelism::Parallel`] degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Runtime switch between a sequential loop and the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Use the rayon pool. Falls back to sequential execution when the crate
    /// is compiled without the `parallel` feature.
    Parallel,
}

impl Parallelism {
    /// Whether this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        match self {
            Parallelism::Sequential => false,
            Parallelism::Parallel => cfg!(feature = "parallel"),
        }
    }
}

/// Map `f` over `items`, preserving order.
pub fn map_slice<T, U, F>(mode: Parallelism, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Map a fallible `f` over `(index, item)` pairs, preserving order.
///
/// The index is stable regardless of execution mode, so callers can derive
/// per-item randomness streams from it.
pub fn try_map_indexed<T, U, F>(mode: Parallelism, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items
            .par_iter()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let _ = mode;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

/// Busy-time accumulator for parallel regions: nanoseconds of work recorded
/// per worker thread. Slot 0 collects work done outside the pool (which is
/// where everything lands in sequential mode or in a build without the
/// `parallel` feature).
#[derive(Debug)]
pub struct ThreadTimers {
    slots: Vec<std::sync::atomic::AtomicU64>,
}

impl ThreadTimers {
    pub fn new() -> Self {
        #[cfg(feature = "parallel")]
        let n = rayon::current_num_threads() + 1;
        #[cfg(not(feature = "parallel"))]
        let n = 1;
        ThreadTimers {
            slots: (0..n)
                .map(|_| std::sync::atomic::AtomicU64::new(0))
                .collect(),
        }
    }

    pub fn record(&self, nanos: u64) {
        #[cfg(feature = "parallel")]
        let idx = rayon::current_thread_index().map_or(0, |i| i + 1);
        #[cfg(not(feature = "parallel"))]
        let idx = 0;
        self.slots[idx].fetch_add(nanos, std::sync::atomic::Ordering::Relaxed);
    }

    /// Busy milliseconds per slot, zero slots omitted.
    pub fn busy_ms(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| s.load(std::sync::atomic::Ordering::Relaxed) as f64 / 1e6)
            .filter(|&ms| ms > 0.0)
            .collect()
    }
}

impl Default for ThreadTimers {
    fn default() -> Self {
        Self::new()
    }
}
