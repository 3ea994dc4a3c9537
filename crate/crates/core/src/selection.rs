//! Index-based selection rules and subsequence analytics.
//!
//! A rule `S : N -> {0, 1}` depends on the index only. Along a rule the
//! empirical frequencies `r_{S,n}` and theoretical means `mu_{S,n}` are
//! averages over the selected indices `i <= n`.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{sample_range, Outcome};
use crate::simplex::Measure;
use crate::stream::MeasureStream;

/// Default number of consecutive non-qualifying indices a revealing scan tolerates.
pub const DEFAULT_SCAN_BUDGET: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum SelectionRule {
    All,
    /// `i mod a == b`.
    Modular {
        a: u64,
        b: u64,
    },
    /// Bit `position` (0 = least significant) of `i` equals `value`.
    IndexBit {
        position: u32,
        value: bool,
    },
    /// Perfect squares `1, 4, 9, ..`.
    Squares,
    /// A finite, strictly increasing list of indices.
    Explicit {
        indices: Arc<Vec<u64>>,
        label: String,
    },
}

impl SelectionRule {
    pub fn modular(a: u64, b: u64) -> Result<Self> {
        if a == 0 {
            return Err(Error::RuleSyntax("modulus must be positive".into()));
        }
        Ok(SelectionRule::Modular { a, b })
    }

    pub fn odd() -> Self {
        SelectionRule::Modular { a: 2, b: 1 }
    }

    pub fn even() -> Self {
        SelectionRule::Modular { a: 2, b: 0 }
    }

    pub fn index_bit(position: u32, value: bool) -> Result<Self> {
        if position >= 63 {
            return Err(Error::RuleSyntax(format!(
                "bit position {position} too large"
            )));
        }
        Ok(SelectionRule::IndexBit { position, value })
    }

    pub fn explicit(mut indices: Vec<u64>, label: impl Into<String>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::RuleSyntax("indices are 1-based".into()));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(SelectionRule::Explicit {
            indices: Arc::new(indices),
            label: label.into(),
        })
    }

    /// Reads whitespace- or comma-separated indices from a file.
    pub fn from_index_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let indices = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|_| Error::RuleSyntax(format!("bad index `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        SelectionRule::explicit(indices, path.display().to_string())
    }

    pub fn selects(&self, i: u64) -> bool {
        match self {
            SelectionRule::All => true,
            SelectionRule::Modular { a, b } => i % a == *b,
            SelectionRule::IndexBit { position, value } => (i >> position & 1 == 1) == *value,
            SelectionRule::Squares => {
                let r = i.isqrt();
                r * r == i
            }
            SelectionRule::Explicit { indices, .. } => indices.binary_search(&i).is_ok(),
        }
    }

    /// Number of selected indices in `1..=i`.
    pub fn count_upto(&self, i: u64) -> u64 {
        match self {
            SelectionRule::All => i,
            SelectionRule::Modular { a, b } => {
                if b >= a || i < *b {
                    0
                } else {
                    (i - b) / a + 1 - u64::from(*b == 0)
                }
            }
            SelectionRule::IndexBit { position, value } => {
                // Ones at bit p among 0..=i: full periods plus the partial one.
                let period = 1u64 << (position + 1);
                let half = 1u64 << position;
                let m = i as u128 + 1;
                let ones = (m / period as u128) as u64 * half
                    + ((m % period as u128) as u64).saturating_sub(half);
                if *value {
                    ones
                } else {
                    i - ones
                }
            }
            SelectionRule::Squares => i.isqrt(),
            SelectionRule::Explicit { indices, .. } => indices.partition_point(|&x| x <= i) as u64,
        }
    }

    /// Asymptotic density when it is positive.
    pub fn positive_density(&self) -> Option<f64> {
        match self {
            SelectionRule::All => Some(1.0),
            SelectionRule::Modular { a, b } if b < a => Some(1.0 / *a as f64),
            SelectionRule::IndexBit { .. } => Some(0.5),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SelectionRule::All => "all".into(),
            SelectionRule::Modular { a, b } => format!("mod:{a},{b}"),
            SelectionRule::IndexBit { position, value } => {
                format!("bit:{position},{}", u8::from(*value))
            }
            SelectionRule::Squares => "squares".into(),
            SelectionRule::Explicit { label, indices } => {
                format!("explicit:{label}[{}]", indices.len())
            }
        }
    }
}

/// `eps_j = eps0 * j^(-decay)` for the `j`-th selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub decay: f64,
}

impl EpsSchedule {
    pub fn new(eps0: f64, decay: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) || !(decay >= 0.0 && decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps schedule needs eps0 > 0 and decay >= 0, got ({eps0}, {decay})"
            )));
        }
        Ok(EpsSchedule { eps0, decay })
    }

    pub fn eps(&self, j: u64) -> f64 {
        self.eps0 * (j as f64).powf(-self.decay)
    }
}

/// Greedy rule selecting indices whose measure is ever closer to `target`.
///
/// Scans `1..=horizon`; the `j`-th selected index `i` satisfies
/// `d(m_i, target) < eps_j`. Fails with [`Error::BudgetExhausted`] once
/// `budget` consecutive indices do not qualify, and with
/// [`Error::NothingSelected`] if the scan ends without any selection.
pub fn revealing_rule(
    stream: &dyn MeasureStream,
    target: &Measure,
    schedule: EpsSchedule,
    horizon: u64,
    budget: u64,
) -> Result<SelectionRule> {
    if target.k() != stream.k() {
        return Err(Error::DimensionMismatch {
            expected: stream.k(),
            got: target.k(),
        });
    }
    let horizon = stream.horizon().map_or(horizon, |h| h.min(horizon));
    // Distances per member, computed once.
    let dist: Vec<f64> = stream
        .credal()
        .members()
        .iter()
        .map(|m| crate::simplex::euclid(m.weights(), target.weights()))
        .collect();
    let mut selected = Vec::new();
    let mut misses = 0u64;
    for i in 1..=horizon {
        let eps = schedule.eps(selected.len() as u64 + 1);
        if dist[stream.member_at(i)] < eps {
            selected.push(i);
            misses = 0;
        } else {
            misses += 1;
            if misses >= budget {
                return Err(Error::BudgetExhausted(budget));
            }
        }
    }
    if selected.is_empty() {
        return Err(Error::NothingSelected(horizon));
    }
    let label = format!("near{:?}", target.weights());
    SelectionRule::explicit(selected, label)
}

/// Config-level rule description, resolved against a stream when needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RuleSpec {
    All,
    Modular {
        a: u64,
        b: u64,
    },
    Bit {
        position: u32,
        value: bool,
    },
    Squares,
    Explicit(String),
    Near {
        target: Vec<f64>,
        eps0: f64,
        decay: f64,
    },
}

impl RuleSpec {
    /// Builds the rule; `near` rules scan `stream` up to `horizon`.
    pub fn resolve(&self, stream: &dyn MeasureStream, horizon: u64) -> Result<SelectionRule> {
        match self {
            RuleSpec::Near {
                target,
                eps0,
                decay,
            } => {
                let m = Measure::new(target.clone())?;
                revealing_rule(
                    stream,
                    &m,
                    EpsSchedule::new(*eps0, *decay)?,
                    horizon,
                    DEFAULT_SCAN_BUDGET,
                )
            }
            _ => self.resolve_index_only(),
        }
    }

    /// Builds rules that depend on the index alone; `near` rules need a stream and fail here.
    pub fn resolve_index_only(&self) -> Result<SelectionRule> {
        match self {
            RuleSpec::All => Ok(SelectionRule::All),
            RuleSpec::Modular { a, b } => SelectionRule::modular(*a, *b),
            RuleSpec::Bit { position, value } => SelectionRule::index_bit(*position, *value),
            RuleSpec::Squares => Ok(SelectionRule::Squares),
            RuleSpec::Explicit(path) => SelectionRule::from_index_file(Path::new(path)),
            RuleSpec::Near { .. } => Err(Error::InvalidArgument(format!(
                "`{self}` needs a measure stream"
            ))),
        }
    }
}

fn parse_numbers<T: FromStr>(body: &str, expected: usize, spec: &str) -> Result<Vec<T>> {
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != expected {
        return Err(Error::RuleSyntax(format!(
            "`{spec}` needs {expected} comma-separated values"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| Error::RuleSyntax(format!("bad number `{p}` in `{spec}`")))
        })
        .collect()
}

impl FromStr for RuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all" => return Ok(RuleSpec::All),
            "odd" => return Ok(RuleSpec::Modular { a: 2, b: 1 }),
            "even" => return Ok(RuleSpec::Modular { a: 2, b: 0 }),
            "squares" => return Ok(RuleSpec::Squares),
            _ => {}
        }
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::RuleSyntax(format!("unknown rule `{s}`")))?;
        match kind {
            "mod" => {
                let v: Vec<u64> = parse_numbers(body, 2, s)?;
                if v[0] == 0 {
                    return Err(Error::RuleSyntax(format!(
                        "`{s}`: modulus must be positive"
                    )));
                }
                Ok(RuleSpec::Modular { a: v[0], b: v[1] })
            }
            "bit" => {
                let v: Vec<u32> = parse_numbers(body, 2, s)?;
                if v[1] > 1 || v[0] >= 63 {
                    return Err(Error::RuleSyntax(format!(
                        "`{s}`: expected bit:<pos < 63>,<0|1>"
                    )));
                }
                Ok(RuleSpec::Bit {
                    position: v[0],
                    value: v[1] == 1,
                })
            }
            "explicit" if !body.is_empty() => Ok(RuleSpec::Explicit(body.to_string())),
            "near" => {
                // near:w1;w2;..;wk,eps0,decay
                let v: Vec<&str> = body.split(',').map(str::trim).collect();
                if v.len() != 3 {
                    return Err(Error::RuleSyntax(format!(
                        "`{s}`: expected near:w1;..;wk,eps0,decay"
                    )));
                }
                let target = v[0]
                    .split(';')
                    .map(|w| {
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::RuleSyntax(format!("bad weight `{w}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let nums: Vec<f64> = parse_numbers(&format!("{},{}", v[1], v[2]), 2, s)?;
                Measure::new(target.clone())?;
                EpsSchedule::new(nums[0], nums[1])?;
                Ok(RuleSpec::Near {
                    target,
                    eps0: nums[0],
                    decay: nums[1],
                })
            }
            _ => Err(Error::RuleSyntax(format!("unknown rule `{s}`"))),
        }
    }
}

impl std::fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuleSpec::All => write!(f, "all"),
            RuleSpec::Modular { a, b } => write!(f, "mod:{a},{b}"),
            RuleSpec::Bit { position, value } => write!(f, "bit:{position},{}", u8::from(*value)),
            RuleSpec::Squares => write!(f, "squares"),
            RuleSpec::Explicit(p) => write!(f, "explicit:{p}"),
            RuleSpec::Near {
                target,
                eps0,
                decay,
            } => {
                let w: Vec<String> = target.iter().map(|x| x.to_string()).collect();
                write!(f, "near:{},{eps0},{decay}", w.join(";"))
            }
        }
    }
}

impl TryFrom<String> for RuleSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RuleSpec> for String {
    fn from(r: RuleSpec) -> String {
        r.to_string()
    }
}

/// Outcome counts along a rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubseqTracker {
    pub counts: Vec<u64>,
    pub selected_n: u64,
    pub total_n: u64,
}

impl SubseqTracker {
    pub fn new(k: usize) -> Self {
        SubseqTracker {
            counts: vec![0; k],
            selected_n: 0,
            total_n: 0,
        }
    }

    /// Observes outcome `omega_{total_n + 1}`.
    pub fn observe(&mut self, rule: &SelectionRule, outcome: Outcome) -> Result<()> {
        let k = self.counts.len();
        if outcome as usize >= k {
            return Err(Error::OutcomeOutOfRange {
                outcome: outcome as usize,
                k,
            });
        }
        self.total_n += 1;
        if rule.selects(self.total_n) {
            self.counts[outcome as usize] += 1;
            self.selected_n += 1;
        }
        Ok(())
    }

    pub fn from_outcomes(rule: &SelectionRule, k: usize, outcomes: &[Outcome]) -> Result<Self> {
        let mut t = SubseqTracker::new(k);
        for &o in outcomes {
            t.observe(rule, o)?;
        }
        Ok(t)
    }
}

/// `r_{S,n}`: relative frequencies over the selected indices.
pub fn selected_freq(tracker: &SubseqTracker) -> Result<Measure> {
    if tracker.selected_n == 0 {
        return Err(Error::NothingSelected(tracker.total_n));
    }
    let n = tracker.selected_n as f64;
    Ok(Measure::from_raw(
        tracker.counts.iter().map(|&c| c as f64 / n).collect(),
    ))
}

/// One tracker per rule over the same outcomes, evaluated in parallel.
pub fn track_rules(
    rules: &[SelectionRule],
    k: usize,
    outcomes: &[Outcome],
) -> Result<Vec<SubseqTracker>> {
    rules
        .par_iter()
        .map(|r| SubseqTracker::from_outcomes(r, k, outcomes))
        .collect()
}

/// `mu_{S,n}`: average of `m_i` over selected `i <= n`.
pub fn theoretical_mean(
    stream: &dyn MeasureStream,
    rule: &SelectionRule,
    n: u64,
) -> Result<Measure> {
    stream.check_horizon(n)?;
    let mut counts = vec![0u64; stream.credal().len()];
    let mut any = false;
    for i in (1..=n).filter(|&i| rule.selects(i)) {
        counts[stream.member_at(i)] += 1;
        any = true;
    }
    if !any {
        return Err(Error::NothingSelected(n));
    }
    Ok(stream.credal().average_of_counts(&counts))
}

/// Estimates of the credal set: `r_{S,n}` for every rule with at least `m` selections.
pub fn estimate_m_hat(trackers: &[SubseqTracker], m: u64) -> Vec<Measure> {
    trackers
        .iter()
        .filter(|t| t.selected_n >= m.max(1))
        .filter_map(|t| selected_freq(t).ok())
        .collect()
}

/// Maximum coordinate difference `max_w |p(w) - q(w)|`.
pub fn max_coordinate_diff(p: &Measure, q: &Measure) -> Result<f64> {
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch {
            expected: p.k(),
            got: q.k(),
        });
    }
    Ok(p.weights()
        .iter()
        .zip(q.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `2 k |S| exp(-eps^2 m^2 / (2n))`.
pub fn fierens_fine_bound(k: usize, num_rules: usize, eps: f64, m: u64, n: u64) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "need 0 < m <= n, got m = {m}, n = {n}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(2.0 * k as f64 * num_rules as f64 * (-eps * eps * m * m / (2.0 * n)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub k: usize,
    pub rules: Vec<String>,
    pub n: u64,
    pub m: u64,
    pub eps: f64,
    pub trials: u64,
    pub violations: u64,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial standard error at `p = min(bound, 1)`.
    pub standard_error: f64,
    pub pass: bool,
}

/// Monte-Carlo frequency of `max_S D(mu_{S,n}, r_{S,n}) >= eps` over rules with at least `m` selections.
///
/// Trial `t` samples with seed `base_seed + t`.
pub fn fierens_fine_check(
    stream: &dyn MeasureStream,
    rules: &[SelectionRule],
    eps: f64,
    m: u64,
    n: u64,
    trials: u64,
    base_seed: u64,
) -> Result<ConcentrationReport> {
    let k = stream.k();
    let bound = fierens_fine_bound(k, rules.len(), eps, m, n)?;
    stream.check_horizon(n)?;
    let eligible: Vec<&SelectionRule> = rules.iter().filter(|r| r.count_upto(n) >= m).collect();
    let means = eligible
        .iter()
        .map(|r| theoretical_mean(stream, r, n))
        .collect::<Result<Vec<_>>>()?;
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let outcomes = sample_range(stream, base_seed.wrapping_add(t), 1, n);
            for (rule, mu) in eligible.iter().zip(&means) {
                let r = selected_freq(&SubseqTracker::from_outcomes(rule, k, &outcomes)?)?;
                if max_coordinate_diff(mu, &r)? >= eps {
                    return Ok(1);
                }
            }
            Ok(0)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let frequency = violations as f64 / trials as f64;
    let p = bound.min(1.0);
    let standard_error = (p * (1.0 - p) / trials as f64).sqrt();
    Ok(ConcentrationReport {
        k,
        rules: rules.iter().map(SelectionRule::describe).collect(),
        n,
        m,
        eps,
        trials,
        violations,
        frequency,
        bound,
        standard_error,
        pass: frequency <= bound + 3.0 * standard_error,
    })
}
