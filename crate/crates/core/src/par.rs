//! Order-preserving data-parallel maps.
//!
//! With the `parallel` feature (default) these run on the rayon pool; without
//! it they are plain sequential iterators. Results always come back in input
//! order, so reductions performed by callers are deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item, returning results in input order.
pub fn map<I, R, F>(items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Applies `f` to `0..n`, returning results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Applies `f` to consecutive chunks of `chunk` items (the last may be shorter).
pub fn map_chunks<I, R, F>(items: &[I], chunk: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &[I]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let n = items.len().div_ceil(chunk);
    map_range(n, |k| {
        let start = k * chunk;
        let end = (start + chunk).min(items.len());
        f(start, &items[start..end])
    })
}

/// Whether this build runs the parallel code paths.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}
