//! Data-parallel execution with a sequential fallback.
//!
//! All reductions use a fixed chunking of the input so that the floating point
//! summation order, and therefore every result, is identical between the sequential
//! and the rayon path and independent of the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items reduced sequentially inside one chunk.
pub const CHUNK: usize = 64;

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Ordered map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Chunked map-reduce. `fold` consumes one chunk into a partial result; partials
    /// are merged left to right in chunk order.
    pub fn fold_chunks<T, A, F, M>(self, items: &[T], fold: F, merge: M) -> Option<A>
    where
        T: Sync,
        A: Send,
        F: Fn(&[T]) -> A + Sync + Send,
        M: Fn(A, A) -> A,
    {
        let partials: Vec<A> = {
            #[cfg(feature = "parallel")]
            {
                if self.is_parallel() {
                    items.par_chunks(CHUNK).map(&fold).collect()
                } else {
                    items.chunks(CHUNK).map(&fold).collect()
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.chunks(CHUNK).map(&fold).collect()
            }
        };
        partials.into_iter().reduce(merge)
    }
}
