//! A shared `f64` accumulator cell built on `AtomicU64` bit views.

use std::sync::atomic::{AtomicU64, Ordering};

/// An `f64` that supports lock-free atomic addition.
///
/// All accesses use relaxed ordering: kernel workers only ever add into
/// disjoint or shared cells and never read results until after the spawning
/// scope joins, which itself provides the necessary happens-before edge.
#[derive(Debug)]
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    #[inline]
    pub fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    #[cfg(test)]
    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn into_inner(self) -> f64 {
        f64::from_bits(self.0.into_inner())
    }

    /// Adds `v` with a compare-exchange retry loop; safe under contention.
    #[inline]
    pub fn add_atomic(&self, v: f64) {
        let mut current = self.0.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(current) + v).to_bits();
            match self
                .0
                .compare_exchange_weak(current, next, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }

    /// Adds `v` as a plain read-modify-write. Only sound when the caller
    /// owns every concurrent write to this cell (e.g. rows strictly inside
    /// one worker's span of a sorted traversal).
    #[inline]
    pub fn add_plain(&self, v: f64) {
        let current = f64::from_bits(self.0.load(Ordering::Relaxed));
        self.0.store((current + v).to_bits(), Ordering::Relaxed);
    }
}
