//! Measure sequences with a prescribed cluster set of Cesàro averages.
//!
//! [`SequenceBuilder`] emits members of a finite credal set one at a time so
//! that the running averages `(1/n) sum_{i<=n} m_i` sweep a target polyline
//! with ever smaller tolerances. Iteration `i` works with tolerances
//! `(eps_i, delta_i, zeta_i)`, approximation blocks of length
//! `v_i = ceil(4(k+1)/delta_i) + 1` and a minimal prefix length `l_i`, and
//! runs three phases:
//!
//! 1. **pair subroutine**: for consecutive centers `(c1, c2)` of an
//!    `eps_i`-cover chain of the target, append an approximation block of
//!    `c2` until the running average is within `kappa` of the block average,
//!    where `kappa` is half of the slack `delta_i - d(c2, block average)`;
//! 2. **stay and grow**: keep appending blocks for the first center of the
//!    next cover until the sequence has length `l_{i+1}`;
//! 3. **shrink ball**: switch to blocks of length `v_{i+1}` until the average
//!    is inside the `delta_{i+1}`-ball of that center.
//!
//! During iteration `i` every running average stays within
//! `eps_i + 2 delta_i + zeta_i` of the target, see [`SequenceBuilder::excursion_bound`].
//!
//! The slow variant ([`SequenceBuilder::slow`]) keeps repeating the block at
//! the end of each pair/shrink step until the whole window `[kappa(n), n]` of
//! running averages lies in the current ball, so window-based estimators
//! inherit the full cluster set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kappa::KappaFn;
use crate::selection::SelectionRule;
use crate::simplex::{
    build_cover_chain, caratheodory_approximate, euclid, ConvexWeights, CredalSet, FiniteBlock,
    Measure, TargetPath,
};
use crate::stream::{MaterializedStream, MeasureStream};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Tolerance sequences `eps_i`, `delta_i`, `zeta_i` for `i = 1, 2, ..`.
///
/// `eps_i = 2 * eps_decay^(i-1)`, `delta_i = 4(k+1) * delta_decay^(i-1)` and
/// `zeta_i = zeta0 * eps_decay^(i-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule {
    pub k: usize,
    pub eps_decay: f64,
    pub delta_decay: f64,
    #[serde(default)]
    pub zeta0: f64,
}

impl ToleranceSchedule {
    /// Halving schedule with `zeta = 0`.
    pub fn geometric(k: usize) -> Self {
        ToleranceSchedule {
            k,
            eps_decay: 0.5,
            delta_decay: 0.5,
            zeta0: 0.0,
        }
    }

    pub fn with_decay(k: usize, eps_decay: f64, delta_decay: f64) -> Result<Self> {
        let s = ToleranceSchedule {
            k,
            eps_decay,
            delta_decay,
            zeta0: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidSchedule(format!("k = {} < 2", self.k)));
        }
        for (name, d) in [
            ("eps_decay", self.eps_decay),
            ("delta_decay", self.delta_decay),
        ] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "{name} = {d} must lie in (0, 1)"
                )));
            }
        }
        if !(self.zeta0 >= 0.0 && self.zeta0.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "zeta0 = {} must be >= 0",
                self.zeta0
            )));
        }
        Ok(())
    }

    pub fn eps(&self, i: u32) -> f64 {
        2.0 * self.eps_decay.powi(i as i32 - 1)
    }

    pub fn delta(&self, i: u32) -> f64 {
        4.0 * (self.k as f64 + 1.0) * self.delta_decay.powi(i as i32 - 1)
    }

    pub fn zeta(&self, i: u32) -> f64 {
        self.zeta0 * self.eps_decay.powi(i as i32 - 1)
    }

    /// Approximation block length `v_i = ceil(4(k+1)/delta_i) + 1`.
    pub fn block_len(&self, i: u32) -> u64 {
        (4.0 * (self.k as f64 + 1.0) / self.delta(i)).ceil() as u64 + 1
    }

    /// Smallest `l >= 1` with `2 v_i / (l + v_i) <= delta_i`.
    ///
    /// Solved exactly in integers from the binary expansion of `delta_i`;
    /// falls back to floating point only if that overflows 128 bits.
    pub fn min_len(&self, i: u32) -> u128 {
        let v = self.block_len(i) as u128;
        let delta = self.delta(i);
        exact_min_len(v, delta).unwrap_or_else(|| {
            let v = v as f64;
            (2.0 * v / delta - v).ceil().max(1.0) as u128
        })
    }

    /// Largest distance to the target any running average may have during iteration `i`.
    pub fn excursion_bound(&self, i: u32) -> f64 {
        self.eps(i) + 2.0 * self.delta(i) + self.zeta(i)
    }
}

/// `max(1, ceil(2v/delta - v))` for `delta = m 2^e`.
fn exact_min_len(v: u128, delta: f64) -> Option<u128> {
    let bits = delta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mut m = (bits & ((1u64 << 52) - 1)) as u128;
    let mut e = if exp == 0 {
        -1074
    } else {
        m |= 1u128 << 52;
        exp - 1075
    };
    while m != 0 && m.is_multiple_of(2) {
        m /= 2;
        e += 1;
    }
    if m == 0 {
        return None;
    }
    // l >= (2v - delta v) / delta, scaled by 2^-e when e < 0.
    let (num_pos, num_neg, den) = if e >= 0 {
        let scale = 1u128.checked_shl(e as u32)?;
        let d = m.checked_mul(scale)?;
        (2 * v, d.checked_mul(v)?, d)
    } else {
        let scale = 1u128.checked_shl((-e) as u32)?;
        if (-e) >= 127 {
            return None;
        }
        ((2 * v).checked_mul(scale)?, m.checked_mul(v)?, m)
    };
    if num_pos <= num_neg {
        return Some(1);
    }
    Some((num_pos - num_neg).div_ceil(den).max(1))
}

/// Direction in which successive iterations walk the target polyline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Traversal {
    /// Odd iterations walk forward, even ones backward, so the bridge between
    /// the last center of one cover and the first of the next is empty.
    #[default]
    Alternating,
    /// Every iteration walks forward; the last center is connected back to
    /// the first by a straight chain.
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    PairSubroutine,
    StayAndGrow,
    ShrinkBall,
}

#[derive(Clone, Debug)]
struct Target {
    approx: Measure,
    block: FiniteBlock,
    kappa: f64,
}

/// Emits a measure sequence whose Cesàro averages cluster exactly on a target polyline.
#[derive(Clone, Debug)]
pub struct SequenceBuilder {
    credal: CredalSet,
    path: TargetPath,
    reversed: TargetPath,
    schedule: ToleranceSchedule,
    traversal: Traversal,
    slow: Option<KappaFn>,
    iteration: u32,
    n: u64,
    running: Vec<f64>,
    counts: Vec<u64>,
    phase: Phase,
    chain: Vec<ConvexWeights>,
    pair_index: usize,
    target: Target,
    pending: Vec<usize>,
    cursor: usize,
    entered_at: Option<u64>,
}

impl SequenceBuilder {
    pub fn new(credal: CredalSet, path: TargetPath, schedule: ToleranceSchedule) -> Result<Self> {
        Self::with_options(credal, path, schedule, Traversal::default(), None)
    }

    /// Slow variant for window estimators with lower end `kappa`.
    pub fn slow(
        credal: CredalSet,
        path: TargetPath,
        schedule: ToleranceSchedule,
        kappa: KappaFn,
    ) -> Result<Self> {
        Self::with_options(credal, path, schedule, Traversal::default(), Some(kappa))
    }

    pub fn with_options(
        credal: CredalSet,
        path: TargetPath,
        schedule: ToleranceSchedule,
        traversal: Traversal,
        slow: Option<KappaFn>,
    ) -> Result<Self> {
        schedule.validate()?;
        if schedule.k != credal.k() {
            return Err(Error::InvalidSchedule(format!(
                "schedule is for k = {} but the credal set has k = {}",
                schedule.k,
                credal.k()
            )));
        }
        if path.waypoints()[0].len() != credal.len() {
            return Err(Error::DimensionMismatch {
                expected: credal.len(),
                got: path.waypoints()[0].len(),
            });
        }
        let first = FiniteBlock::new(&credal, vec![0])?;
        let reversed = path.reversed();
        let k = credal.k();
        let mut b = SequenceBuilder {
            counts: vec![0; credal.len()],
            credal,
            path,
            reversed,
            schedule,
            traversal,
            slow,
            iteration: 1,
            n: 0,
            running: vec![0.0; k],
            phase: Phase::PairSubroutine,
            chain: Vec::new(),
            pair_index: 0,
            target: Target {
                approx: first.average().clone(),
                block: first,
                kappa: 0.0,
            },
            pending: vec![0],
            cursor: 0,
            entered_at: None,
        };
        b.begin_iteration(1)?;
        Ok(b)
    }

    fn oriented(&self, i: u32) -> &TargetPath {
        match self.traversal {
            Traversal::Alternating if i.is_multiple_of(2) => &self.reversed,
            _ => &self.path,
        }
    }

    fn next_start(&self) -> ConvexWeights {
        self.oriented(self.iteration + 1).waypoints()[0].clone()
    }

    fn begin_iteration(&mut self, i: u32) -> Result<()> {
        self.iteration = i;
        let eps = self.schedule.eps(i);
        let mut chain = build_cover_chain(self.oriented(i), eps, self.schedule.zeta(i))?;
        let next = self.oriented(i + 1).waypoints()[0].clone();
        let last = chain.last().expect("cover chain is nonempty").clone();
        let gap = euclid(
            self.credal.combine(&last)?.weights(),
            self.credal.combine(&next)?.weights(),
        );
        if gap > 1e-15 {
            let steps = (gap / (eps / 2.0)).ceil().max(1.0) as usize;
            for j in 1..=steps {
                chain.push(last.lerp(&next, j as f64 / steps as f64));
            }
        }
        self.chain = chain;
        self.pair_index = 1;
        if self.chain.len() > 1 {
            self.phase = Phase::PairSubroutine;
            self.set_ball_target(&self.chain[1].clone(), i)?;
        } else {
            self.enter_stay_and_grow()?;
        }
        Ok(())
    }

    /// Targets `weights` with blocks of length `v_level` and the `delta_level` slack.
    fn set_ball_target(&mut self, weights: &ConvexWeights, level: u32) -> Result<()> {
        let v = self.schedule.block_len(level) as usize;
        let block = caratheodory_approximate(&self.credal, weights, v)?;
        let center = self.credal.combine(weights)?;
        let approx = block.average().clone();
        let slack = self.schedule.delta(level) - euclid(center.weights(), approx.weights());
        debug_assert!(slack > 0.0);
        let kappa = slack / 2.0;
        self.entered_at = if euclid(&self.running, approx.weights()) < kappa {
            Some(self.n)
        } else {
            None
        };
        self.target = Target {
            approx,
            block,
            kappa,
        };
        Ok(())
    }

    fn enter_stay_and_grow(&mut self) -> Result<()> {
        self.phase = Phase::StayAndGrow;
        let v = self.schedule.block_len(self.iteration) as usize;
        let block = caratheodory_approximate(&self.credal, &self.next_start(), v)?;
        self.target = Target {
            approx: block.average().clone(),
            block,
            kappa: f64::INFINITY,
        };
        self.entered_at = None;
        Ok(())
    }

    fn enter_shrink(&mut self) -> Result<()> {
        self.phase = Phase::ShrinkBall;
        let next = self.next_start();
        self.set_ball_target(&next, self.iteration + 1)
    }

    fn in_ball(&self) -> bool {
        euclid(&self.running, self.target.approx.weights()) < self.target.kappa
    }

    fn gap_closed(&self) -> bool {
        if !self.in_ball() {
            return false;
        }
        match (self.slow, self.entered_at) {
            (None, _) => true,
            (Some(kappa), Some(entered)) => kappa.eval(self.n) >= entered,
            (Some(_), None) => false,
        }
    }

    fn plan(&mut self) -> Result<()> {
        loop {
            match self.phase {
                Phase::PairSubroutine => {
                    if self.gap_closed() {
                        self.pair_index += 1;
                        if self.pair_index < self.chain.len() {
                            let w = self.chain[self.pair_index].clone();
                            self.set_ball_target(&w, self.iteration)?;
                        } else {
                            self.enter_stay_and_grow()?;
                        }
                        continue;
                    }
                }
                Phase::StayAndGrow => {
                    if self.n as u128 >= self.schedule.min_len(self.iteration + 1) {
                        self.enter_shrink()?;
                        continue;
                    }
                }
                Phase::ShrinkBall => {
                    if self.gap_closed() {
                        self.begin_iteration(self.iteration + 1)?;
                        continue;
                    }
                }
            }
            self.pending.clear();
            self.pending.extend_from_slice(self.target.block.entries());
            self.cursor = 0;
            return Ok(());
        }
    }

    fn record(&mut self, member: usize) {
        let total = (self.n + 1) as f64;
        let (wa, wb) = (self.n as f64 / total, 1.0 / total);
        for (r, p) in self
            .running
            .iter_mut()
            .zip(self.credal.member(member).weights())
        {
            *r = wa * *r + wb * p;
        }
        self.n += 1;
        self.counts[member] += 1;
        if self.slow.is_some() && self.phase != Phase::StayAndGrow {
            if self.in_ball() {
                self.entered_at.get_or_insert(self.n);
            } else {
                self.entered_at = None;
            }
        }
    }

    /// Emits the next member index.
    pub fn next_index(&mut self) -> usize {
        while self.cursor >= self.pending.len() {
            // Construction inputs were validated up front, so planning cannot fail.
            self.plan().expect("validated builder cannot fail to plan");
        }
        let member = self.pending[self.cursor];
        self.cursor += 1;
        self.record(member);
        member
    }

    /// Emits the next measure.
    pub fn next_measure(&mut self) -> &Measure {
        let j = self.next_index();
        self.credal.member(j)
    }

    /// Emits `n` more positions into a finite stream.
    pub fn materialize(&mut self, n: u64) -> MaterializedStream {
        let indices = (0..n).map(|_| self.next_index() as u32).collect();
        MaterializedStream::new(self.credal.clone(), indices, self.describe())
            .expect("builder only emits members")
    }

    pub fn describe(&self) -> String {
        match self.slow {
            Some(k) => format!("builder-slow[{k}]"),
            None => "builder".into(),
        }
    }

    pub fn credal(&self) -> &CredalSet {
        &self.credal
    }

    pub fn path(&self) -> &TargetPath {
        &self.path
    }

    pub fn schedule(&self) -> &ToleranceSchedule {
        &self.schedule
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of emitted measures.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Running average of everything emitted so far (undefined before the first emission).
    pub fn running_average(&self) -> Measure {
        Measure::from_raw(self.running.clone())
    }

    pub fn running_weights(&self) -> &[f64] {
        &self.running
    }

    /// Per-member emission counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Current ball radius around the approximation target, infinite during stay-and-grow.
    pub fn ball_radius(&self) -> f64 {
        self.target.kappa
    }

    pub fn target_average(&self) -> &Measure {
        &self.target.approx
    }

    /// Bound on the distance between running averages and the target during the current iteration.
    pub fn excursion_bound(&self) -> f64 {
        self.schedule.excursion_bound(self.iteration)
    }

    pub fn snapshot(&self) -> BuilderSnapshot {
        BuilderSnapshot {
            version: SNAPSHOT_VERSION,
            credal_set: self.credal.clone(),
            target_path: self.path.waypoints().to_vec(),
            schedule: self.schedule,
            traversal: self.traversal,
            slow_kappa: self.slow,
            iteration: self.iteration,
            n: self.n,
            running_average: self.running.clone(),
            counts: self.counts.clone(),
            phase: self.phase,
            pair_index: self.pair_index,
            pending: self.pending.clone(),
            cursor: self.cursor,
            entered_at: self.entered_at,
        }
    }

    pub fn restore(s: BuilderSnapshot) -> Result<Self> {
        if s.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                s.version
            )));
        }
        let path = TargetPath::new(&s.credal_set, s.target_path)?;
        let mut b = Self::with_options(s.credal_set, path, s.schedule, s.traversal, s.slow_kappa)?;
        if s.iteration == 0
            || s.counts.len() != b.credal.len()
            || s.running_average.len() != b.credal.k()
        {
            return Err(Error::Snapshot("inconsistent builder state".into()));
        }
        if s.counts.iter().sum::<u64>() != s.n || s.cursor > s.pending.len() {
            return Err(Error::Snapshot("counts, length and cursor disagree".into()));
        }
        if s.pending.iter().any(|&j| j >= b.credal.len()) {
            return Err(Error::Snapshot(
                "pending block references unknown members".into(),
            ));
        }
        b.begin_iteration(s.iteration)?;
        match s.phase {
            Phase::PairSubroutine => {
                if s.pair_index == 0 || s.pair_index >= b.chain.len() {
                    return Err(Error::Snapshot(format!(
                        "pair index {} out of range",
                        s.pair_index
                    )));
                }
                b.pair_index = s.pair_index;
                let w = b.chain[s.pair_index].clone();
                b.set_ball_target(&w, s.iteration)?;
            }
            Phase::StayAndGrow => {
                b.pair_index = b.chain.len();
                b.enter_stay_and_grow()?;
            }
            Phase::ShrinkBall => {
                b.pair_index = b.chain.len();
                b.enter_shrink()?;
            }
        }
        b.n = s.n;
        b.running = s.running_average;
        b.counts = s.counts;
        b.pending = s.pending;
        b.cursor = s.cursor;
        b.entered_at = s.entered_at;
        Ok(b)
    }
}

impl Iterator for SequenceBuilder {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        Some(self.next_index())
    }
}

/// Versioned, resumable builder state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuilderSnapshot {
    pub version: u32,
    pub credal_set: CredalSet,
    pub target_path: Vec<ConvexWeights>,
    pub schedule: ToleranceSchedule,
    pub traversal: Traversal,
    pub slow_kappa: Option<KappaFn>,
    pub iteration: u32,
    pub n: u64,
    pub running_average: Vec<f64>,
    pub counts: Vec<u64>,
    pub phase: Phase,
    pub pair_index: usize,
    pub pending: Vec<usize>,
    pub cursor: usize,
    pub entered_at: Option<u64>,
}

impl BuilderSnapshot {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

/// Interleaves a base stream with round-robin visits to every credal set member.
///
/// At indices selected by a zero-density rule the stream cycles through the
/// members of the credal set, so each member is a cluster point of the measure
/// sequence; all other indices replay the base stream in order. The Cesàro
/// averages differ from the base ones by at most `2 * selected(n) / n`.
pub struct InterleavedStream<S> {
    base: S,
    rule: SelectionRule,
}

impl<S: MeasureStream> InterleavedStream<S> {
    pub fn new(base: S, credal: &CredalSet, rule: SelectionRule) -> Result<Self> {
        if base.credal() != credal {
            return Err(Error::InvalidArgument(
                "base stream must draw from the interleaving credal set".into(),
            ));
        }
        if let Some(density) = rule.positive_density() {
            return Err(Error::PositiveDensity(format!(
                "{} has density {density}",
                rule.describe()
            )));
        }
        Ok(InterleavedStream { base, rule })
    }

    /// Base position served at unselected index `i`.
    fn base_position(&self, i: u64) -> u64 {
        i - self.rule.count_upto(i)
    }
}

impl<S: MeasureStream> MeasureStream for InterleavedStream<S> {
    fn credal(&self) -> &CredalSet {
        self.base.credal()
    }

    fn member_at(&self, i: u64) -> usize {
        if self.rule.selects(i) {
            let c = self.rule.count_upto(i);
            ((c - 1) % self.credal().len() as u64) as usize
        } else {
            self.base.member_at(self.base_position(i))
        }
    }

    fn horizon(&self) -> Option<u64> {
        let h = self.base.horizon()?;
        // i - count(i) is nondecreasing; find the largest i with value <= h.
        let (mut lo, mut hi) = (h, h.saturating_mul(2).max(h + 1));
        while hi - self.rule.count_upto(hi) <= h {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if mid - self.rule.count_upto(mid) <= h {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    fn describe(&self) -> String {
        format!(
            "interleave[{} | {}]",
            self.base.describe(),
            self.rule.describe()
        )
    }
}

/// See [`InterleavedStream`].
pub fn interleave_cover<S: MeasureStream>(
    base: S,
    credal: &CredalSet,
    sparse_rule: SelectionRule,
) -> Result<InterleavedStream<S>> {
    InterleavedStream::new(base, credal, sparse_rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::distance;

    fn coin_path(lo: f64, hi: f64) -> (CredalSet, TargetPath) {
        let credal = CredalSet::simplex_vertices(2).unwrap();
        let path = TargetPath::from_weights(&credal, vec![vec![lo, 1.0 - lo], vec![hi, 1.0 - hi]])
            .unwrap();
        (credal, path)
    }

    #[test]
    fn schedule_initial_values() {
        let s = ToleranceSchedule::geometric(3);
        assert_eq!(s.eps(1), 2.0);
        assert_eq!(s.delta(1), 16.0);
        assert_eq!(s.block_len(1), 2);
        assert_eq!(s.min_len(1), 1);
        assert!(ToleranceSchedule::with_decay(3, 1.0, 0.5).is_err());
        assert!(ToleranceSchedule::with_decay(1, 0.5, 0.5).is_err());
    }

    #[test]
    fn min_len_is_minimal() {
        // delta_i = 4(k+1) / 2^(i-1), so 2v/(l+v) <= delta_i iff 2v 2^(i-1) <= 4(k+1)(l+v).
        for k in [2u128, 3, 5] {
            let s = ToleranceSchedule::geometric(k as usize);
            for i in 1..=50u32 {
                let v = s.block_len(i) as u128;
                assert_eq!(v, (1u128 << (i - 1)) + 1, "v at i = {i}");
                let fits = |l: u128| 2 * v * (1u128 << (i - 1)) <= 4 * (k + 1) * (l + v);
                let l = s.min_len(i);
                assert!(l >= 1 && fits(l), "i = {i}");
                assert!(l == 1 || !fits(l - 1), "i = {i}");
            }
        }
    }

    #[test]
    fn singleton_credal_set_is_constant() {
        let credal = CredalSet::new(vec![Measure::new(vec![0.2, 0.8]).unwrap()]).unwrap();
        let path = TargetPath::from_weights(&credal, vec![vec![1.0]]).unwrap();
        let mut b = SequenceBuilder::new(credal, path, ToleranceSchedule::geometric(2)).unwrap();
        for _ in 0..10_000 {
            assert_eq!(b.next_index(), 0);
        }
    }

    #[test]
    fn first_emission_is_member_zero() {
        let (credal, path) = coin_path(0.4, 0.6);
        let mut b = SequenceBuilder::new(credal, path, ToleranceSchedule::geometric(2)).unwrap();
        assert_eq!(b.next_index(), 0);
        assert_eq!(b.n(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (credal, path) = coin_path(0.4, 0.6);
        assert!(SequenceBuilder::new(
            credal.clone(),
            path.clone(),
            ToleranceSchedule::geometric(3)
        )
        .is_err());
        let bad = ToleranceSchedule {
            k: 2,
            eps_decay: 0.5,
            delta_decay: 1.5,
            zeta0: 0.0,
        };
        assert!(SequenceBuilder::new(credal.clone(), path, bad).is_err());
        assert!(TargetPath::from_weights(&credal, vec![vec![0.4, 0.7]]).is_err());
    }

    #[test]
    fn pair_steps_end_inside_delta_ball() {
        let credal = CredalSet::simplex_vertices(3).unwrap();
        let path = TargetPath::from_weights(
            &credal,
            vec![
                vec![0.6, 0.2, 0.2],
                vec![0.2, 0.6, 0.2],
                vec![0.2, 0.2, 0.6],
            ],
        )
        .unwrap();
        let mut b =
            SequenceBuilder::new(credal.clone(), path, ToleranceSchedule::geometric(3)).unwrap();
        let mut closed = 0;
        for _ in 0..300_000 {
            let before = (b.iteration(), b.pair_index, b.phase());
            let c2 = credal
                .combine(&b.chain[b.pair_index.min(b.chain.len() - 1)])
                .unwrap();
            let r = b.running_weights().to_vec();
            b.next_index();
            if before.2 == Phase::PairSubroutine
                && (b.iteration(), b.pair_index) != (before.0, before.1)
            {
                assert!(euclid(&r, c2.weights()) < b.schedule().delta(before.0));
                closed += 1;
            }
        }
        assert!(closed > 20, "{closed}");
    }

    #[test]
    fn snapshot_resume_is_exact() {
        let (credal, path) = coin_path(0.35, 0.65);
        let mut a = SequenceBuilder::new(credal, path, ToleranceSchedule::geometric(2)).unwrap();
        for _ in 0..12_345 {
            a.next_index();
        }
        let json = a.snapshot().to_json().unwrap();
        let mut b = SequenceBuilder::restore(BuilderSnapshot::from_json(&json).unwrap()).unwrap();
        for _ in 0..50_000 {
            assert_eq!(a.next_index(), b.next_index());
        }
        assert_eq!(a.running_weights(), b.running_weights());
    }

    #[test]
    fn snapshot_rejects_other_versions() {
        let (credal, path) = coin_path(0.35, 0.65);
        let a = SequenceBuilder::new(credal, path, ToleranceSchedule::geometric(2)).unwrap();
        let mut s = a.snapshot();
        s.version = 99;
        assert!(matches!(
            SequenceBuilder::restore(s),
            Err(Error::Snapshot(_))
        ));
    }

    #[test]
    fn slow_variant_with_identity_window_emits_valid_sequence() {
        let (credal, path) = coin_path(0.4, 0.6);
        let mut b = SequenceBuilder::slow(
            credal,
            path,
            ToleranceSchedule::geometric(2),
            KappaFn::Identity,
        )
        .unwrap();
        let mut counts = [0u64; 2];
        for _ in 0..100_000 {
            counts[b.next_index()] += 1;
        }
        assert_eq!(counts.iter().sum::<u64>(), 100_000);
        assert!(b.iteration() > 3);
    }

    #[test]
    fn slow_variant_matches_plain_builder_on_vertex_target() {
        let credal = CredalSet::simplex_vertices(2).unwrap();
        let path = TargetPath::from_weights(&credal, vec![vec![1.0, 0.0]]).unwrap();
        let s = ToleranceSchedule::geometric(2);
        let mut plain = SequenceBuilder::new(credal.clone(), path.clone(), s).unwrap();
        let mut slow = SequenceBuilder::slow(credal, path, s, KappaFn::Sqrt).unwrap();
        for _ in 0..10_000 {
            assert_eq!(plain.next_index(), slow.next_index());
        }
    }

    #[test]
    fn converges_to_singleton_target() {
        let credal = CredalSet::simplex_vertices(3).unwrap();
        let path = TargetPath::from_weights(&credal, vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let target = path.points()[0].clone();
        let mut b = SequenceBuilder::new(credal, path, ToleranceSchedule::geometric(3)).unwrap();
        for _ in 0..200_000 {
            b.next_index();
        }
        assert!(distance(&b.running_average(), &target).unwrap() < 0.02);
    }
}
