//! Measure streams: the parameter sequence `m_1, m_2, ..` of a non-stationary,
//! locally precise data model.
//!
//! Every stream draws from a finite [`CredalSet`] and reports the member index
//! at each (1-based) position, so membership in the credal set is exact.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::simplex::{CredalSet, Measure};

pub trait MeasureStream: Send + Sync {
    fn credal(&self) -> &CredalSet;

    /// Member index of `m_i`, for `i >= 1`.
    fn member_at(&self, i: u64) -> usize;

    /// Number of available positions, `None` for unbounded streams.
    fn horizon(&self) -> Option<u64> {
        None
    }

    fn describe(&self) -> String;

    fn measure_at(&self, i: u64) -> &Measure {
        self.credal().member(self.member_at(i))
    }

    fn k(&self) -> usize {
        self.credal().k()
    }

    /// Fails when the stream cannot serve `n` positions.
    fn check_horizon(&self, n: u64) -> Result<()> {
        match self.horizon() {
            Some(h) if h < n => Err(Error::InvalidArgument(format!(
                "stream `{}` has {h} positions, {n} requested",
                self.describe()
            ))),
            _ => Ok(()),
        }
    }
}

impl<S: MeasureStream + ?Sized> MeasureStream for Arc<S> {
    fn credal(&self) -> &CredalSet {
        (**self).credal()
    }
    fn member_at(&self, i: u64) -> usize {
        (**self).member_at(i)
    }
    fn horizon(&self) -> Option<u64> {
        (**self).horizon()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: MeasureStream + ?Sized> MeasureStream for Box<S> {
    fn credal(&self) -> &CredalSet {
        (**self).credal()
    }
    fn member_at(&self, i: u64) -> usize {
        (**self).member_at(i)
    }
    fn horizon(&self) -> Option<u64> {
        (**self).horizon()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// The same measure at every index (the i.i.d. model).
#[derive(Clone, Debug)]
pub struct ConstantStream {
    credal: CredalSet,
}

impl ConstantStream {
    pub fn new(measure: Measure) -> Self {
        ConstantStream {
            credal: CredalSet::new(vec![measure]).expect("one member"),
        }
    }
}

impl MeasureStream for ConstantStream {
    fn credal(&self) -> &CredalSet {
        &self.credal
    }
    fn member_at(&self, _i: u64) -> usize {
        0
    }
    fn describe(&self) -> String {
        format!("constant{:?}", self.credal.member(0).weights())
    }
}

/// Cycles through the members of a credal set: `m_i = M[(i - 1) mod |M|]`.
///
/// With the coin pair this is the alternating-coins model: odd indices use the
/// 1/3 coin, even indices the 2/3 coin.
#[derive(Clone, Debug)]
pub struct CyclicStream {
    credal: CredalSet,
}

impl CyclicStream {
    pub fn new(credal: CredalSet) -> Self {
        CyclicStream { credal }
    }

    pub fn alternating_coins() -> Self {
        CyclicStream::new(CredalSet::coin_pair())
    }
}

impl MeasureStream for CyclicStream {
    fn credal(&self) -> &CredalSet {
        &self.credal
    }
    fn member_at(&self, i: u64) -> usize {
        debug_assert!(i >= 1);
        ((i - 1) % self.credal.len() as u64) as usize
    }
    fn describe(&self) -> String {
        format!("cyclic[{}]", self.credal.len())
    }
}

/// Coin choice driven by the second most significant bit of the index.
///
/// Bit 0 selects the 1/3 coin, bit 1 the 2/3 coin. Index 1 has no second bit
/// and uses the 1/3 coin.
#[derive(Clone, Debug)]
pub struct WeirdCoinStream {
    credal: CredalSet,
}

impl WeirdCoinStream {
    pub fn new() -> Self {
        WeirdCoinStream {
            credal: CredalSet::coin_pair(),
        }
    }

    pub fn second_msb(i: u64) -> Option<bool> {
        if i < 2 {
            return None;
        }
        let top = 63 - i.leading_zeros();
        Some(i >> (top - 1) & 1 == 1)
    }
}

impl Default for WeirdCoinStream {
    fn default() -> Self {
        Self::new()
    }
}

impl MeasureStream for WeirdCoinStream {
    fn credal(&self) -> &CredalSet {
        &self.credal
    }
    fn member_at(&self, i: u64) -> usize {
        match WeirdCoinStream::second_msb(i) {
            Some(true) => 1,
            _ => 0,
        }
    }
    fn describe(&self) -> String {
        "weird-coin".into()
    }
}

/// A finite stream stored as member indices.
#[derive(Clone, Debug)]
pub struct MaterializedStream {
    credal: CredalSet,
    indices: Vec<u32>,
    description: String,
}

impl MaterializedStream {
    pub fn new(
        credal: CredalSet,
        indices: Vec<u32>,
        description: impl Into<String>,
    ) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j as usize >= credal.len()) {
            return Err(Error::InvalidArgument(format!(
                "member index {bad} out of range for {} members",
                credal.len()
            )));
        }
        Ok(MaterializedStream {
            credal,
            indices,
            description: description.into(),
        })
    }

    /// Copies the first `n` positions of any stream.
    pub fn from_stream(stream: &dyn MeasureStream, n: u64) -> Result<Self> {
        stream.check_horizon(n)?;
        let indices = (1..=n).map(|i| stream.member_at(i) as u32).collect();
        Ok(MaterializedStream {
            credal: stream.credal().clone(),
            indices,
            description: stream.describe(),
        })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl MeasureStream for MaterializedStream {
    fn credal(&self) -> &CredalSet {
        &self.credal
    }
    fn member_at(&self, i: u64) -> usize {
        self.indices[(i - 1) as usize] as usize
    }
    fn horizon(&self) -> Option<u64> {
        Some(self.indices.len() as u64)
    }
    fn describe(&self) -> String {
        self.description.clone()
    }
}

/// Exact Cesàro averages `(1/n) sum_{i<=n} m_i` for `n = 1..=len`, via member counts.
pub struct CesaroAverages<'a> {
    stream: &'a dyn MeasureStream,
    counts: Vec<u64>,
    n: u64,
}

impl<'a> CesaroAverages<'a> {
    pub fn new(stream: &'a dyn MeasureStream) -> Self {
        CesaroAverages {
            stream,
            counts: vec![0; stream.credal().len()],
            n: 0,
        }
    }

    /// Advances one position and returns the new average.
    pub fn step(&mut self) -> Measure {
        self.n += 1;
        self.counts[self.stream.member_at(self.n)] += 1;
        self.stream.credal().average_of_counts(&self.counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weird_coin_bits() {
        let s = WeirdCoinStream::new();
        assert_eq!(s.member_at(1), 0);
        assert_eq!(s.member_at(2), 0); // 10
        assert_eq!(s.member_at(3), 1); // 11
        assert_eq!(s.member_at(4), 0); // 100
        assert_eq!(s.member_at(5), 0); // 101
        assert_eq!(s.member_at(6), 1); // 110
        assert_eq!(s.member_at(7), 1); // 111
        assert_eq!(s.member_at(8), 0);
        assert_eq!(s.member_at(12), 1);
        assert_eq!(s.member_at(u64::MAX), 1);
    }

    #[test]
    fn alternating_coins_parity() {
        let s = CyclicStream::alternating_coins();
        assert!((s.measure_at(1).weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.measure_at(2).weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.member_at(1001), 0);
    }

    #[test]
    fn materialized_horizon() {
        let s = MaterializedStream::from_stream(&CyclicStream::alternating_coins(), 10).unwrap();
        assert_eq!(s.horizon(), Some(10));
        assert!(s.check_horizon(11).is_err());
        assert_eq!(s.member_at(10), 1);
        assert!(MaterializedStream::new(CredalSet::coin_pair(), vec![2], "bad").is_err());
    }

    #[test]
    fn cesaro_of_alternating() {
        let s = CyclicStream::alternating_coins();
        let mut c = CesaroAverages::new(&s);
        let mut last = c.step();
        for _ in 1..100 {
            last = c.step();
        }
        assert!((last.weights()[0] - 0.5).abs() < 1e-15);
    }
}
