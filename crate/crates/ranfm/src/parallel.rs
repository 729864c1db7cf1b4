//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the row-wise kernels run on the
//! rayon pool; without it everything is sequential. A runtime switch
//! ([`set_parallel`]) lets benchmarks compare both paths inside one binary.
//!
//! Every parallel kernel assigns each output element to exactly one task and
//! keeps all floating-point accumulation orders identical to the sequential
//! path, so results are bit-identical regardless of thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Rows-times-columns below which row-parallel kernels stay sequential;
/// rayon task overhead dominates under this size.
pub(crate) const PAR_MIN_ELEMS: usize = 16 * 1024;

/// Enable or disable the rayon path at runtime. A no-op (always sequential)
/// when the crate is built without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

/// Whether kernels currently dispatch to the rayon pool.
pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Apply `f(row_index, row)` to each `width`-sized row of `out`, in parallel
/// when enabled and the buffer is large enough.
pub(crate) fn for_each_row<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert!(width > 0 && out.len() % width == 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= PAR_MIN_ELEMS {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    for (i, row) in out.chunks_mut(width).enumerate() {
        f(i, row);
    }
}

/// Map an indexed range into a vector, in parallel when enabled. Output
/// order follows the index order either way.
pub(crate) fn map_indexed<T, F>(n: usize, heavy: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && (heavy || n >= 64) {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = heavy;
    (0..n).map(f).collect()
}
