//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the indexed maps run on rayon;
//! without it they are plain loops. Outputs are always in index order and
//! every worker derives its own seed from the index, so results are
//! bitwise identical in both modes. [`set_force_sequential`] switches the
//! compiled-in rayon paths off at runtime (the CLI `--deterministic` flag).

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

pub fn set_force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn force_sequential() -> bool {
    FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// True when the next parallel helper call will actually fan out.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !force_sequential()
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !force_sequential() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error wins.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !force_sequential() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Below this many elements the fan-out overhead outweighs the work; the
/// helpers fall back to plain loops. Results are identical either way.
const GRAIN: usize = 16_384;

/// Run `f` on each `row_len` chunk of `data`. Chunks are disjoint, so the
/// parallel version is race-free and bitwise identical to the sequential one.
pub fn for_each_row_mut<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(row_len > 0 && data.len() % row_len == 0);
    #[cfg(feature = "parallel")]
    if !force_sequential() && data.len() >= GRAIN {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    data.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

/// Like [`for_each_row_mut`] but the final chunk may be shorter (used by
/// the blocked matrix kernels whose row count need not divide the tile).
pub fn for_each_chunk_mut<F>(data: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    if !force_sequential() && data.len() >= GRAIN {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, chunk)| f(i, chunk));
}

/// Rowwise map over two equally-chunked buffers (e.g. an output matrix and
/// its per-row cache).
pub fn for_each_row_pair_mut<F>(a: &mut [f64], la: usize, b: &mut [f64], lb: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    debug_assert!(la > 0 && lb > 0 && a.len() / la == b.len() / lb);
    #[cfg(feature = "parallel")]
    if !force_sequential() && a.len() + b.len() >= GRAIN {
        a.par_chunks_mut(la)
            .zip(b.par_chunks_mut(lb))
            .enumerate()
            .for_each(|(i, (ra, rb))| f(i, ra, rb));
        return;
    }
    a.chunks_mut(la)
        .zip(b.chunks_mut(lb))
        .enumerate()
        .for_each(|(i, (ra, rb))| f(i, ra, rb));
}

/// Rowwise map over a packed buffer with per-row lengths `lens` (used for
/// packed triangular factors).
pub fn for_each_packed_row_mut<F>(data: &mut [f64], lens: &[usize], f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert_eq!(data.len(), lens.iter().sum::<usize>());
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(lens.len());
    let mut rest = data;
    for (i, &len) in lens.iter().enumerate() {
        let (head, tail) = rest.split_at_mut(len);
        rows.push((i, head));
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    if !force_sequential() && lens.iter().sum::<usize>() >= GRAIN {
        rows.into_par_iter().for_each(|(i, row)| f(i, row));
        return;
    }
    rows.into_iter().for_each(|(i, row)| f(i, row));
}

/// Sequential twin of [`map_indexed`], used by the benchmark suite for
/// side-by-side comparison regardless of the global toggle.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
