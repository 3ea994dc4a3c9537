//! Streaming analytics over outcome sequences: relative frequencies, gamble
//! averages, the windowed min/max (Walley-Fine) estimator, apparent
//! convergence and tail clouds of averages.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::generator::Outcome;
use crate::kappa::KappaFn;
use crate::simplex::{hausdorff_to_path, Gamble, Measure, TargetPath};
use crate::stream::MeasureStream;

/// Largest outcome count for which apparent divergence enumerates all events.
pub const MAX_DIVERGENCE_K: usize = 12;

/// Default cap on the number of points kept in a tail cloud.
pub const MAX_CLOUD_POINTS: usize = 10_000;

/// Outcome counts and the relative frequencies `r_n = counts / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqTracker {
    counts: Vec<u64>,
    n: u64,
}

impl FreqTracker {
    pub fn new(k: usize) -> Self {
        FreqTracker {
            counts: vec![0; k],
            n: 0,
        }
    }

    pub fn from_outcomes(k: usize, outcomes: &[Outcome]) -> Result<Self> {
        let mut t = FreqTracker::new(k);
        for &o in outcomes {
            t.update(o)?;
        }
        Ok(t)
    }

    pub fn update(&mut self, outcome: Outcome) -> Result<()> {
        let k = self.counts.len();
        let slot = self
            .counts
            .get_mut(outcome as usize)
            .ok_or(Error::OutcomeOutOfRange {
                outcome: outcome as usize,
                k,
            })?;
        *slot += 1;
        self.n += 1;
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn relative_freq(&self) -> Result<Measure> {
        if self.n == 0 {
            return Err(Error::Empty("frequency tracker".into()));
        }
        let n = self.n as f64;
        Ok(Measure::from_raw(
            self.counts.iter().map(|&c| c as f64 / n).collect(),
        ))
    }

    /// `r_n(A)`.
    pub fn freq_of(&self, event: Event) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::Empty("frequency tracker".into()));
        }
        let c: u64 = event
            .outcomes()
            .take_while(|&j| j < self.k())
            .map(|j| self.counts[j])
            .sum();
        Ok(c as f64 / self.n as f64)
    }

    /// `E_{r_n}[l]`, which equals the running mean `(1/n) sum l(omega_i)`.
    pub fn gamble_average(&self, gamble: &Gamble) -> Result<f64> {
        self.relative_freq()?.expectation(gamble)
    }
}

/// Running means `a_j = (1/j) sum_{i<=j} l(omega_i)` for `j = 1..=n`.
pub fn running_means(outcomes: &[Outcome], gamble: &Gamble) -> Result<Vec<f64>> {
    let k = gamble.k();
    let mut sum = 0.0;
    outcomes
        .iter()
        .enumerate()
        .map(|(j, &o)| {
            if o as usize >= k {
                return Err(Error::OutcomeOutOfRange {
                    outcome: o as usize,
                    k,
                });
            }
            sum += gamble.value(o as usize);
            Ok(sum / (j + 1) as f64)
        })
        .collect()
}

/// Windowed estimator `(min, max) of a_j over j in [kappa(n), n]`.
///
/// Monotone deques give amortized O(1) updates; the window only slides
/// forward because `kappa` is nondecreasing. Running extrema over all `j` are
/// kept as well.
#[derive(Clone, Debug)]
pub struct AverageHistory {
    kappa: KappaFn,
    n: u64,
    min_q: VecDeque<(u64, f64)>,
    max_q: VecDeque<(u64, f64)>,
    last: f64,
    all_min: f64,
    all_max: f64,
}

impl AverageHistory {
    pub fn new(kappa: KappaFn) -> Self {
        AverageHistory {
            kappa,
            n: 0,
            min_q: VecDeque::new(),
            max_q: VecDeque::new(),
            last: f64::NAN,
            all_min: f64::INFINITY,
            all_max: f64::NEG_INFINITY,
        }
    }

    /// Appends `a_{n+1}`.
    pub fn push(&mut self, average: f64) {
        self.n += 1;
        let j = self.n;
        while self.min_q.back().is_some_and(|&(_, v)| v >= average) {
            self.min_q.pop_back();
        }
        self.min_q.push_back((j, average));
        while self.max_q.back().is_some_and(|&(_, v)| v <= average) {
            self.max_q.pop_back();
        }
        self.max_q.push_back((j, average));
        let lo = self.kappa.eval(j);
        while self.min_q.front().is_some_and(|&(i, _)| i < lo) {
            self.min_q.pop_front();
        }
        while self.max_q.front().is_some_and(|&(i, _)| i < lo) {
            self.max_q.pop_front();
        }
        self.last = average;
        self.all_min = self.all_min.min(average);
        self.all_max = self.all_max.max(average);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Current `(lower, upper)`.
    pub fn wf_estimate(&self) -> Result<(f64, f64)> {
        match (self.min_q.front(), self.max_q.front()) {
            (Some(&(_, lo)), Some(&(_, hi))) => Ok((lo, hi)),
            _ => Err(Error::Empty("average history".into())),
        }
    }

    pub fn last(&self) -> f64 {
        self.last
    }

    /// Extrema over every average seen so far.
    pub fn running_extrema(&self) -> (f64, f64) {
        (self.all_min, self.all_max)
    }
}

/// Direct recomputation of the windowed estimator from all averages (`averages[j-1] = a_j`).
pub fn wf_estimate_brute(averages: &[f64], kappa: KappaFn, n: u64) -> Result<(f64, f64)> {
    if n == 0 || n as usize > averages.len() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} outside 1..={}",
            averages.len()
        )));
    }
    let lo = kappa.eval(n).max(1) as usize;
    let w = &averages[lo - 1..n as usize];
    Ok((
        w.iter().cloned().fold(f64::INFINITY, f64::min),
        w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ))
}

/// Estimator trace `(n, a_n, lower, upper)` for a gamble, every `stride` steps and at the end.
pub fn wf_trace(
    outcomes: &[Outcome],
    gamble: &Gamble,
    kappa: KappaFn,
    stride: u64,
) -> Result<Vec<(u64, f64, f64, f64)>> {
    let stride = stride.max(1);
    let mut h = AverageHistory::new(kappa);
    let mut out = Vec::new();
    let total = outcomes.len() as u64;
    for (j, a) in running_means(outcomes, gamble)?.into_iter().enumerate() {
        h.push(a);
        let n = j as u64 + 1;
        if n.is_multiple_of(stride) || n == total {
            let (lo, hi) = h.wf_estimate()?;
            out.push((n, a, lo, hi));
        }
    }
    Ok(out)
}

/// `C_n(A; start, eps)`: every `r_j(A)` with `start <= j <= n` lies within `eps` of `r_n(A)`.
pub fn apparent_convergence(
    outcomes: &[Outcome],
    event: Event,
    start: u64,
    eps: f64,
    n: u64,
) -> Result<bool> {
    if start == 0 || start > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= start <= n, got start = {start}, n = {n}"
        )));
    }
    if n as usize > outcomes.len() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} exceeds {} outcomes",
            outcomes.len()
        )));
    }
    let prefix = &outcomes[..n as usize];
    let hits = prefix
        .iter()
        .filter(|&&o| event.contains(o as usize))
        .count();
    let r_n = hits as f64 / n as f64;
    let mut count = 0u64;
    for (j, &o) in prefix.iter().enumerate() {
        count += u64::from(event.contains(o as usize));
        let j = j as u64 + 1;
        if j >= start && (count as f64 / j as f64 - r_n).abs() >= eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `D_n(start, eps)`: some nontrivial event fails to converge apparently.
pub fn apparent_divergence(
    outcomes: &[Outcome],
    k: usize,
    start: u64,
    eps: f64,
    n: u64,
) -> Result<bool> {
    if !(2..=MAX_DIVERGENCE_K).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "apparent divergence over all events needs 2 <= k <= {MAX_DIVERGENCE_K}, got {k}"
        )));
    }
    let events: Vec<Event> = Event::nontrivial(k).collect();
    divergence_over(outcomes, &events, start, eps, n)
}

/// Apparent divergence restricted to a user-supplied event list.
pub fn divergence_over(
    outcomes: &[Outcome],
    events: &[Event],
    start: u64,
    eps: f64,
    n: u64,
) -> Result<bool> {
    let results = events
        .par_iter()
        .map(|&a| apparent_convergence(outcomes, a, start, eps, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(results.iter().any(|c| !c))
}

/// Averages `r_j` for `j` in `[burn_in, n]`: a subsample plus exact coordinate extrema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCloud {
    pub burn_in: u64,
    pub n: u64,
    pub stride: u64,
    pub points: Vec<Measure>,
    pub coord_min: Vec<f64>,
    pub coord_max: Vec<f64>,
}

impl TailCloud {
    fn collect<I: Iterator<Item = Vec<f64>>>(
        averages: I,
        k: usize,
        burn_in: u64,
        n: u64,
        cap: usize,
    ) -> Result<Self> {
        if burn_in == 0 || burn_in > n {
            return Err(Error::Empty(format!("tail window [{burn_in}, {n}]")));
        }
        let width = n - burn_in + 1;
        let stride = width.div_ceil(cap.max(1) as u64).max(1);
        let mut cloud = TailCloud {
            burn_in,
            n,
            stride,
            points: Vec::new(),
            coord_min: vec![f64::INFINITY; k],
            coord_max: vec![f64::NEG_INFINITY; k],
        };
        for (j, r) in (1..=n).zip(averages) {
            if j < burn_in {
                continue;
            }
            for ((lo, hi), &x) in cloud
                .coord_min
                .iter_mut()
                .zip(cloud.coord_max.iter_mut())
                .zip(&r)
            {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
            if (j - burn_in).is_multiple_of(stride) || j == n {
                cloud.points.push(Measure::from_raw(r));
            }
        }
        Ok(cloud)
    }

    /// Cloud of relative-frequency vectors of an outcome sequence.
    pub fn from_outcomes(outcomes: &[Outcome], k: usize, burn_in: u64, n: u64) -> Result<Self> {
        if n as usize > outcomes.len() {
            return Err(Error::InvalidArgument(format!(
                "n = {n} exceeds {} outcomes",
                outcomes.len()
            )));
        }
        let mut counts = vec![0u64; k];
        let mut j = 0u64;
        let it = outcomes[..n as usize].iter().map(move |&o| {
            counts[o as usize] += 1;
            j += 1;
            counts
                .iter()
                .map(|&c| c as f64 / j as f64)
                .collect::<Vec<_>>()
        });
        if let Some(&bad) = outcomes[..n as usize].iter().find(|&&o| o as usize >= k) {
            return Err(Error::OutcomeOutOfRange {
                outcome: bad as usize,
                k,
            });
        }
        TailCloud::collect(it, k, burn_in, n, MAX_CLOUD_POINTS)
    }

    /// Cloud of exact Cesàro averages of a measure stream.
    pub fn from_stream(stream: &dyn MeasureStream, burn_in: u64, n: u64) -> Result<Self> {
        stream.check_horizon(n)?;
        let credal = stream.credal();
        let mut counts = vec![0u64; credal.len()];
        let it = (1..=n).map(move |i| {
            counts[stream.member_at(i)] += 1;
            credal.average_of_counts(&counts).weights().to_vec()
        });
        TailCloud::collect(it, stream.k(), burn_in, n, MAX_CLOUD_POINTS)
    }

    /// Cloud from an arbitrary sequence of average vectors `r_1, r_2, ..`.
    pub fn from_averages<I: IntoIterator<Item = Vec<f64>>>(
        averages: I,
        k: usize,
        burn_in: u64,
        n: u64,
    ) -> Result<Self> {
        TailCloud::collect(averages.into_iter(), k, burn_in, n, MAX_CLOUD_POINTS)
    }

    /// Symmetric Hausdorff distance to a reference polyline sampled at `1e-3`.
    pub fn hausdorff(&self, reference: &TargetPath) -> Result<f64> {
        hausdorff_to_path(&self.points, reference, 1e-3)
    }
}
