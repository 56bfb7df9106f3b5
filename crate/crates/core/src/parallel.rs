//! Thin shims over rayon so every call site compiles with or without the
//! `parallel` feature. The sequential fallbacks are shaped to produce
//! bit-identical output (same chunking, same reduction order).

/// Run two closures, concurrently when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA,
    B: FnOnce() -> RB,
{
    (a(), b())
}

/// Map a function over items, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map a function over fixed-size chunks of a slice, preserving chunk order.
/// Callers fold the per-chunk results sequentially so the combined result is
/// identical under both features.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &[T]) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items
        .par_chunks(chunk)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
where
    F: Fn(usize, &[T]) -> U,
{
    items.chunks(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
}

/// Map over indices 0..n, preserving order.
#[cfg(feature = "parallel")]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}
