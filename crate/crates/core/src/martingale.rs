//! Martingale estimator over a sequentially updated sketch.
//!
//! Each insertion that changes the sketch adds `1/q` to the running estimate,
//! where `q` is the change probability of the state *before* the insertion.
//! The retrospective variance accumulates `(1-q)/q^2` at the same moments.
//! Counters have no merge: the estimate depends on arrival order.

use crate::hashing::HashedElement;
use crate::sketches::ChangeProbability;

/// Inserts between two from-scratch recomputations of the change terms.
pub const RESYNC_INTERVAL: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleCounter<S> {
    inner: S,
    estimate: f64,
    retro_var: f64,
    updates_since_resync: u64,
}

impl<S: ChangeProbability> MartingaleCounter<S> {
    /// Wraps a sketch. The counter starts at zero regardless of what the
    /// sketch already holds.
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            estimate: 0.0,
            retro_var: 0.0,
            updates_since_resync: 0,
        }
    }

    pub fn insert(&mut self, element: &[u8]) -> bool {
        let h = crate::hashing::hash64(element, self.inner.seed());
        self.insert_hash(h)
    }

    #[inline]
    pub fn insert_hash(&mut self, h: HashedElement) -> bool {
        let q = self.inner.change_probability();
        let changed = self.inner.insert_hash(h);
        if changed {
            self.estimate += 1.0 / q;
            self.retro_var += (1.0 - q) / (q * q);
        }
        self.updates_since_resync += 1;
        if self.updates_since_resync >= RESYNC_INTERVAL {
            self.resync();
        }
        changed
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    /// Retrospective variance `V`; its expectation equals `Var(E)`.
    pub fn retro_variance(&self) -> f64 {
        self.retro_var
    }

    /// Recomputes the inner sketch's change terms from its registers.
    pub fn resync(&mut self) {
        self.inner.resync_terms();
        self.updates_since_resync = 0;
    }

    pub fn updates_since_resync(&self) -> u64 {
        self.updates_since_resync
    }

    pub fn sketch(&self) -> &S {
        &self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}
