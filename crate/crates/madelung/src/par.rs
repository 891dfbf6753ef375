// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the loops below fan out over
//! rayon; without it they run in place. Work is always split at fixed
//! chunk boundaries and per-item state is independent, so results are
//! bit-identical in both modes and for any thread count.

/// Chunk size for particle arrays. Fixed so that parallel and
/// sequential execution touch identical chunk boundaries.
pub const PARTICLE_CHUNK: usize = 8192;

#[cfg(feature = "parallel")]
pub fn for_each_indexed_chunk2<F>(a: &mut [f64], b: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    use rayon::prelude::*;
    a.par_chunks_mut(chunk)
        .zip(b.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(ci, (ca, cb))| f(ci * chunk, ca, cb));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_indexed_chunk2<F>(a: &mut [f64], b: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    for (ci, (ca, cb)) in a.chunks_mut(chunk).zip(b.chunks_mut(chunk)).enumerate() {
        f(ci * chunk, ca, cb);
    }
}

#[cfg(feature = "parallel")]
pub fn for_each_indexed_chunk<F>(a: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    use rayon::prelude::*;
    a.par_chunks_mut(chunk).enumerate().for_each(|(ci, ca)| f(ci * chunk, ca));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_indexed_chunk<F>(a: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    for (ci, ca) in a.chunks_mut(chunk).enumerate() {
        f(ci * chunk, ca);
    }
}

/// Map fixed-size chunks of a slice to partial results, then combine
/// them in chunk order. The sequential combine keeps floating-point
/// sums independent of the thread count.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync,
{
    use rayon::prelude::*;
    items
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, c)| f(ci * chunk, c))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync,
{
    items.chunks(chunk).enumerate().map(|(ci, c)| f(ci * chunk, c)).collect()
}

/// Run `f` for every index in `0..count`, writing into disjoint output
/// rows produced by the caller's closure.
#[cfg(feature = "parallel")]
pub fn for_each_index<F>(count: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().for_each(f);
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_index<F>(count: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    (0..count).for_each(f);
}

/// Map each `ncols`-row of `src` into the matching row of `dst`.
/// Rows are independent, so parallel and sequential results agree
/// bitwise.
#[cfg(feature = "parallel")]
pub fn for_each_row_pair<F>(dst: &mut [f64], src: &[f64], ncols: usize, f: F)
where
    F: Fn(usize, &mut [f64], &[f64]) + Sync,
{
    use rayon::prelude::*;
    dst.par_chunks_mut(ncols)
        .zip(src.par_chunks(ncols))
        .enumerate()
        .for_each(|(row, (d, s))| f(row, d, s));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row_pair<F>(dst: &mut [f64], src: &[f64], ncols: usize, f: F)
where
    F: Fn(usize, &mut [f64], &[f64]) + Sync,
{
    for (row, (d, s)) in dst.chunks_mut(ncols).zip(src.chunks(ncols)).enumerate() {
        f(row, d, s);
    }
}

/// Sequential twin of [`for_each_row_pair`], always compiled; the
/// criterion suite benches it against the parallel path.
pub fn for_each_row_pair_serial<F>(dst: &mut [f64], src: &[f64], ncols: usize, f: F)
where
    F: Fn(usize, &mut [f64], &[f64]) + Sync,
{
    for (row, (d, s)) in dst.chunks_mut(ncols).zip(src.chunks(ncols)).enumerate() {
        f(row, d, s);
    }
}

/// Fill each `ncols`-row of `dst` independently.
#[cfg(feature = "parallel")]
pub fn for_each_row<F>(dst: &mut [f64], ncols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    use rayon::prelude::*;
    dst.par_chunks_mut(ncols).enumerate().for_each(|(row, d)| f(row, d));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row<F>(dst: &mut [f64], ncols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    for (row, d) in dst.chunks_mut(ncols).enumerate() {
        f(row, d);
    }
}
