//! Seeded sampling of outcome sequences from a measure stream.
//!
//! Draw `i` uses the uniform variate at counter position `i` of a ChaCha12
//! keystream keyed by the seed, so any index range can be generated on its
//! own and longer runs extend shorter ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::Measure;
use crate::stream::MeasureStream;

/// Outcomes are stored as bytes; `k` never exceeds 64.
pub type Outcome = u8;

const SHARD: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSequence {
    pub k: usize,
    pub seed: u64,
    pub stream: String,
    pub outcomes: Vec<Outcome>,
}

impl OutcomeSequence {
    pub fn new(
        k: usize,
        seed: u64,
        stream: impl Into<String>,
        outcomes: Vec<Outcome>,
    ) -> Result<Self> {
        if let Some(&o) = outcomes.iter().find(|&&o| o as usize >= k) {
            return Err(Error::OutcomeOutOfRange {
                outcome: o as usize,
                k,
            });
        }
        Ok(OutcomeSequence {
            k,
            seed,
            stream: stream.into(),
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Uniform variates `u_i` in `[0, 1)` for a seed, addressable by index.
#[derive(Clone, Debug)]
pub struct UniformStream {
    rng: ChaCha12Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Positions the stream so the next variate is `u_i` (1-based).
    pub fn seek(&mut self, i: u64) {
        debug_assert!(i >= 1);
        self.rng.set_word_pos(2 * (i as u128 - 1));
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn at(seed: u64, i: u64) -> f64 {
        let mut s = UniformStream::new(seed);
        s.seek(i);
        s.next_uniform()
    }
}

/// Inverse-CDF draw with left-closed intervals `[F_{j-1}, F_j)`.
pub fn draw(measure: &Measure, u: f64) -> Outcome {
    let w = measure.weights();
    let mut cumulative = 0.0;
    for (j, &p) in w.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return j as Outcome;
        }
    }
    // u lands above a cumulative sum that rounded below 1: take the last outcome with mass.
    w.iter().rposition(|&p| p > 0.0).unwrap_or(0) as Outcome
}

/// Outcomes at indices `start..start + len` (1-based).
pub fn sample_range(stream: &dyn MeasureStream, seed: u64, start: u64, len: u64) -> Vec<Outcome> {
    let mut u = UniformStream::new(seed);
    if len > 0 {
        u.seek(start);
    }
    (start..start + len)
        .map(|i| draw(stream.measure_at(i), u.next_uniform()))
        .collect()
}

/// Outcomes `omega_1, .., omega_n`.
pub fn sample(stream: &dyn MeasureStream, seed: u64, n: u64) -> Result<OutcomeSequence> {
    stream.check_horizon(n)?;
    let outcomes = sample_range(stream, seed, 1, n);
    Ok(OutcomeSequence {
        k: stream.k(),
        seed,
        stream: stream.describe(),
        outcomes,
    })
}

/// Same output as [`sample`], generated in independent shards on the rayon pool.
pub fn sample_parallel(stream: &dyn MeasureStream, seed: u64, n: u64) -> Result<OutcomeSequence> {
    stream.check_horizon(n)?;
    let shards = n.div_ceil(SHARD);
    let parts: Vec<Vec<Outcome>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let start = s * SHARD + 1;
            sample_range(stream, seed, start, SHARD.min(n + 1 - start))
        })
        .collect();
    Ok(OutcomeSequence {
        k: stream.k(),
        seed,
        stream: stream.describe(),
        outcomes: parts.concat(),
    })
}
