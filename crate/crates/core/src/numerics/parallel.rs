//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature, kernels split work over disjoint output chunks
//! (batch items or output channels) on the rayon pool. Every chunk is computed
//! by exactly one worker in a fixed order, and cross-chunk reductions are summed
//! sequentially afterwards, so results do not depend on thread count.
//! [`set_sequential`] forces everything onto the calling thread.

use std::sync::atomic::{AtomicBool, Ordering};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Switch the strict single-threaded mode on or off for the whole process.
pub fn set_sequential(on: bool) {
    SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_sequential() -> bool {
    SEQUENTIAL.load(Ordering::SeqCst) || !cfg!(feature = "parallel")
}

/// Run `f(index, chunk)` over consecutive `chunk_len`-sized pieces of `out`.
pub(crate) fn for_each_chunk<T, F>(out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in out.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

/// Evaluate `f(i)` for `i in 0..n`, preserving index order in the result.
pub(crate) fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}
