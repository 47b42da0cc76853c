//! Deterministic data-parallel kernels.
//!
//! Every reduction is split into fixed-size chunks whose partial results are
//! combined sequentially in chunk order, so results are bit-identical for any
//! number of worker threads and with the `parallel` feature disabled.
//! [`Exec`] selects the code path at run time; without the `parallel`
//! feature [`Exec::Parallel`] silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reduction chunk length. Changing it changes rounding, not results' meaning.
pub const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Applies `f(chunk_index, chunk)` to consecutive `CHUNK`-sized pieces of `out`.
pub fn for_each_chunk_mut<T, F>(exec: Exec, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Maps `f` over chunk indices `0..n_chunks` and returns results in order.
pub fn map_chunks<R, F>(exec: Exec, n_chunks: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n_chunks).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n_chunks).map(f).collect()
}

/// Sum of `f(i)` for `i in 0..len`, reduced chunk-wise in a fixed order.
pub fn chunked_sum<F>(exec: Exec, len: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let n_chunks = len.div_ceil(CHUNK);
    map_chunks(exec, n_chunks, |c| {
        let start = c * CHUNK;
        f(start..(start + CHUNK).min(len))
    })
    .into_iter()
    .sum()
}

/// Eight independent accumulators, combined in a fixed order.
#[inline]
fn lane_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

pub fn dot(exec: Exec, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    chunked_sum(exec, a.len(), |r| lane_dot(&a[r.clone()], &b[r]))
}

pub fn norm_sqr(exec: Exec, a: &[f64]) -> f64 {
    chunked_sum(exec, a.len(), |r| lane_dot(&a[r.clone()], &a[r]))
}

/// `y += alpha * x`
pub fn axpy(exec: Exec, alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len());
    for_each_chunk_mut(exec, y, CHUNK, |c, ys| {
        let xs = &x[c * CHUNK..c * CHUNK + ys.len()];
        for (yi, xi) in ys.iter_mut().zip(xs) {
            *yi += alpha * xi;
        }
    });
}

pub fn scale(exec: Exec, alpha: f64, y: &mut [f64]) {
    for_each_chunk_mut(exec, y, CHUNK, |_, ys| ys.iter_mut().for_each(|v| *v *= alpha));
}
