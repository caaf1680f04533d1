//! Thin facade over the data-parallel inner loops.
//!
//! With the `parallel` feature (default) the hot scans fan out through rayon;
//! without it they run sequentially with identical results. Only reductions
//! that are exactly associative (max, ordered collect) go through here, so
//! output bytes do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maximum of `f` over `items`; `NEG_INFINITY` on an empty slice.
pub fn map_max<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).reduce(|| f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Order-preserving map; parallel when the feature is on.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// Order-preserving indexed map over `0..n`.
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
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

/// Always-sequential variant of [`map_max`], kept for benchmark comparisons.
pub fn map_max_seq<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    items.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}
