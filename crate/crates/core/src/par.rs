//! Deterministic data parallelism over index ranges.
//!
//! Work is split into contiguous chunks on scoped threads; results come back
//! in index order, so reductions done afterwards are bit-identical to a
//! serial loop.

use std::num::NonZeroUsize;

fn threads() -> usize {
    std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1).min(16)
}

/// `(0..n).map(f).collect()`, in parallel for large `n`.
pub fn map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let k = threads();
    if k == 1 || n < 256 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(k);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|c| {
                let lo = (c * chunk).min(n);
                let hi = ((c + 1) * chunk).min(n);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Fallible variant of [`map`]; the first error in index order wins.
pub fn try_map<T: Send, E: Send>(n: usize, f: impl Fn(usize) -> Result<T, E> + Sync) -> Result<Vec<T>, E> {
    map(n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn preserves_order() {
        let v = super::map(10_000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 3 * i));
        let e: Result<Vec<usize>, usize> = super::try_map(1000, |i| if i % 300 == 299 { Err(i) } else { Ok(i) });
        assert_eq!(e, Err(299));
    }
}
