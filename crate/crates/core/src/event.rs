use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest outcome count for which events are stored as a bitmask.
pub const MAX_OUTCOMES: usize = 64;

/// A subset of the outcome space `{0, .., k-1}` stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event(u64);

impl Event {
    pub const EMPTY: Event = Event(0);

    pub fn from_bits(bits: u64) -> Self {
        Event(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The whole outcome space of size `k`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_OUTCOMES, "k = {k} exceeds {MAX_OUTCOMES}");
        if k == 64 {
            Event(u64::MAX)
        } else {
            Event((1u64 << k) - 1)
        }
    }

    pub fn singleton(outcome: usize) -> Self {
        Event(1u64 << outcome)
    }

    pub fn from_outcomes(outcomes: &[usize], k: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &o in outcomes {
            if o >= k || o >= MAX_OUTCOMES {
                return Err(Error::OutcomeOutOfRange { outcome: o, k });
            }
            bits |= 1u64 << o;
        }
        Ok(Event(bits))
    }

    pub fn contains(self, outcome: usize) -> bool {
        outcome < MAX_OUTCOMES && self.0 & (1u64 << outcome) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, k: usize) -> Self {
        Event(!self.0 & Event::full(k).0)
    }

    pub fn union(self, other: Event) -> Self {
        Event(self.0 | other.0)
    }

    pub fn intersection(self, other: Event) -> Self {
        Event(self.0 & other.0)
    }

    pub fn symmetric_difference(self, other: Event) -> Self {
        Event(self.0 ^ other.0)
    }

    pub fn is_subset_of(self, other: Event) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Event) -> bool {
        self.0 & other.0 == 0
    }

    pub fn outcomes(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_OUTCOMES).filter(move |&j| bits & (1u64 << j) != 0)
    }

    /// All `2^k` events in bitmask order.
    pub fn all(k: usize) -> impl Iterator<Item = Event> {
        assert!(k < MAX_OUTCOMES, "exhaustive enumeration needs k < 64");
        (0..(1u64 << k)).map(Event)
    }

    /// The `2^k - 2` events that are neither empty nor the whole space.
    pub fn nontrivial(k: usize) -> impl Iterator<Item = Event> {
        assert!(k < MAX_OUTCOMES, "exhaustive enumeration needs k < 64");
        (1..(1u64 << k) - 1).map(Event)
    }

    /// Indicator vector of length `k`.
    pub fn indicator(self, k: usize) -> Vec<f64> {
        (0..k)
            .map(|j| if self.contains(j) { 1.0 } else { 0.0 })
            .collect()
    }
}
