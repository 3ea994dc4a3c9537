//! Lower and upper envelopes of a finite credal set, coherence-style axiom
//! checks, rectangle evaluations of the product models and typicality
//! distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::simplex::{CredalSet, Gamble};

/// Slack allowed in every axiom comparison.
pub const AXIOM_TOLERANCE: f64 = 1e-12;

/// Largest `k` for which envelopes are tabulated over all `2^k` events.
pub const MAX_TABLE_K: usize = 16;

/// Largest `k` for exhaustive P-axiom checks.
pub const MAX_EXHAUSTIVE_K: usize = 12;

/// At most this many witnesses are kept per report.
const MAX_WITNESSES: usize = 32;

/// A pair of conjugate-looking set functions on the events of `{0, .., k-1}`.
pub trait SetFunction: Sync {
    fn k(&self) -> usize;
    fn lower(&self, a: Event) -> f64;
    fn upper(&self, a: Event) -> f64;
}

/// `min` / `max` of `mu(A)` over the members.
pub fn lower_prob(credal: &CredalSet, a: Event) -> f64 {
    credal
        .members()
        .iter()
        .map(|m| m.prob(a))
        .fold(f64::INFINITY, f64::min)
}

pub fn upper_prob(credal: &CredalSet, a: Event) -> f64 {
    credal
        .members()
        .iter()
        .map(|m| m.prob(a))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `min` of `E_mu[X]` over the members.
pub fn lower_prevision(credal: &CredalSet, x: &Gamble) -> Result<f64> {
    credal
        .members()
        .iter()
        .map(|m| m.expectation(x))
        .try_fold(f64::INFINITY, |acc, e| e.map(|e| acc.min(e)))
}

pub fn upper_prevision(credal: &CredalSet, x: &Gamble) -> Result<f64> {
    Ok(-lower_prevision(credal, &x.neg())?)
}

/// Lower and upper probabilities of a credal set, tabulated for small `k`.
#[derive(Clone, Debug)]
pub struct EnvelopePair {
    credal: CredalSet,
    table: Option<Vec<(f64, f64)>>,
}

impl EnvelopePair {
    pub fn new(credal: CredalSet) -> Self {
        let k = credal.k();
        let table = (k <= MAX_TABLE_K).then(|| {
            let size = 1usize << k;
            let mut t = vec![(f64::INFINITY, f64::NEG_INFINITY); size];
            let mut p = vec![0.0; size];
            for m in credal.members() {
                let w = m.weights();
                for bits in 1..size {
                    let low = bits.trailing_zeros() as usize;
                    p[bits] = p[bits & (bits - 1)] + w[low];
                }
                for (slot, &v) in t.iter_mut().zip(&p) {
                    slot.0 = slot.0.min(v);
                    slot.1 = slot.1.max(v);
                }
            }
            // The empty set and the whole space take their exact values.
            t[0] = (0.0, 0.0);
            t[size - 1] = (1.0, 1.0);
            t
        });
        EnvelopePair { credal, table }
    }

    pub fn credal(&self) -> &CredalSet {
        &self.credal
    }

    pub fn lower_prevision(&self, x: &Gamble) -> Result<f64> {
        lower_prevision(&self.credal, x)
    }

    pub fn upper_prevision(&self, x: &Gamble) -> Result<f64> {
        upper_prevision(&self.credal, x)
    }

    /// `d(A, B) = upper(A symmetric-difference B)`.
    pub fn typicality_distance(&self, a: Event, b: Event) -> f64 {
        typicality_distance(self, a, b)
    }

    /// `T_a(A) = 1 - lower(A)`.
    pub fn absolute_typicality(&self, a: Event) -> f64 {
        1.0 - self.lower(a)
    }
}

impl SetFunction for EnvelopePair {
    fn k(&self) -> usize {
        self.credal.k()
    }

    fn lower(&self, a: Event) -> f64 {
        match &self.table {
            Some(t) => t[a.bits() as usize].0,
            None => lower_prob(&self.credal, a),
        }
    }

    fn upper(&self, a: Event) -> f64 {
        match &self.table {
            Some(t) => t[a.bits() as usize].1,
            None => upper_prob(&self.credal, a),
        }
    }
}

/// Explicit set function given by its upper values; the lower values follow by conjugacy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSetFunction {
    k: usize,
    upper: Vec<f64>,
}

impl TableSetFunction {
    pub fn from_upper(k: usize, upper: Vec<f64>) -> Result<Self> {
        if k > MAX_TABLE_K || upper.len() != 1usize << k {
            return Err(Error::InvalidArgument(format!(
                "need 2^{k} upper values, got {}",
                upper.len()
            )));
        }
        Ok(TableSetFunction { k, upper })
    }

    /// Upper values on singletons and pairs given explicitly, everything else
    /// filled with the sum of singleton values (capped at 1), `Omega` set to 1.
    pub fn with_overrides(
        k: usize,
        singletons: &[f64],
        overrides: &[(Event, f64)],
    ) -> Result<Self> {
        if singletons.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: singletons.len(),
            });
        }
        let mut upper: Vec<f64> = Event::all(k)
            .map(|a| a.outcomes().map(|j| singletons[j]).sum::<f64>().min(1.0))
            .collect();
        upper[0] = 0.0;
        *upper.last_mut().expect("k >= 1") = 1.0;
        for &(a, v) in overrides {
            upper[a.bits() as usize] = v;
        }
        TableSetFunction::from_upper(k, upper)
    }
}

impl SetFunction for TableSetFunction {
    fn k(&self) -> usize {
        self.k
    }

    fn lower(&self, a: Event) -> f64 {
        1.0 - self.upper[a.complement(self.k).bits() as usize]
    }

    fn upper(&self, a: Event) -> f64 {
        self.upper[a.bits() as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: String,
    /// Events involved, as bitmasks.
    pub events: Vec<u64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub k: usize,
    /// Number of instances checked per axiom.
    pub checked: Vec<(String, u64)>,
    pub violation_count: u64,
    pub witnesses: Vec<AxiomViolation>,
}

impl AxiomReport {
    fn new(k: usize) -> Self {
        AxiomReport {
            k,
            ..Default::default()
        }
    }

    pub fn pass(&self) -> bool {
        self.violation_count == 0
    }

    fn absorb(&mut self, axiom: &str, checked: u64, found: Vec<AxiomViolation>, total: u64) {
        self.checked.push((axiom.to_string(), checked));
        self.violation_count += total;
        let room = MAX_WITNESSES.saturating_sub(self.witnesses.len());
        self.witnesses.extend(found.into_iter().take(room));
    }

    pub fn violations_of(&self, axiom: &str) -> impl Iterator<Item = &AxiomViolation> {
        let axiom = axiom.to_string();
        self.witnesses.iter().filter(move |v| v.axiom == axiom)
    }
}

/// Runs `check` over `0..count` in parallel, keeping the first witnesses and the total count.
fn scan<F>(count: u64, check: F) -> (Vec<AxiomViolation>, u64)
where
    F: Fn(u64) -> Option<AxiomViolation> + Sync,
{
    const CHUNK: u64 = 1 << 14;
    let parts: Vec<(Vec<AxiomViolation>, u64)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut found = Vec::new();
            let mut total = 0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                if let Some(v) = check(i) {
                    total += 1;
                    if found.len() < MAX_WITNESSES {
                        found.push(v);
                    }
                }
            }
            (found, total)
        })
        .collect();
    let total = parts.iter().map(|p| p.1).sum();
    let mut found: Vec<_> = parts.into_iter().flat_map(|p| p.0).collect();
    found.truncate(MAX_WITNESSES);
    (found, total)
}

fn violation(axiom: &str, events: &[Event], lhs: f64, rhs: f64) -> Option<AxiomViolation> {
    (lhs > rhs + AXIOM_TOLERANCE).then(|| AxiomViolation {
        axiom: axiom.into(),
        events: events.iter().map(|e| e.bits()).collect(),
        lhs,
        rhs,
    })
}

/// Decodes index `i` in `0..3^k` into a pair `A subset-of B`.
fn nested_pair(mut i: u64, k: usize) -> (Event, Event) {
    let (mut a, mut b) = (0u64, 0u64);
    for j in 0..k {
        match i % 3 {
            1 => b |= 1 << j,
            2 => {
                a |= 1 << j;
                b |= 1 << j;
            }
            _ => {}
        }
        i /= 3;
    }
    (Event::from_bits(a), Event::from_bits(b))
}

/// Decodes index `i` in `0..3^k` into a disjoint pair.
fn disjoint_pair(mut i: u64, k: usize) -> (Event, Event) {
    let (mut a, mut b) = (0u64, 0u64);
    for j in 0..k {
        match i % 3 {
            1 => a |= 1 << j,
            2 => b |= 1 << j,
            _ => {}
        }
        i /= 3;
    }
    (Event::from_bits(a), Event::from_bits(b))
}

/// Exhaustive check of P1 (empty set and whole space), P2 (monotonicity of
/// both functions), P3 (subadditivity of the upper function on all pairs),
/// P4 (superadditivity of the lower function on disjoint pairs) and conjugacy.
pub fn check_p_axioms(sf: &dyn SetFunction) -> Result<AxiomReport> {
    let k = sf.k();
    if k > MAX_EXHAUSTIVE_K {
        return Err(Error::InvalidArgument(format!(
            "exhaustive checks need k <= {MAX_EXHAUSTIVE_K}; use check_p_axioms_on for sampled events"
        )));
    }
    let mut report = AxiomReport::new(k);
    let full = Event::full(k);
    let empty = Event::EMPTY;

    let mut p1 = Vec::new();
    for (e, want) in [(empty, 0.0), (full, 1.0)] {
        for (name, got) in [("lower", sf.lower(e)), ("upper", sf.upper(e))] {
            if (got - want).abs() > AXIOM_TOLERANCE {
                p1.push(AxiomViolation {
                    axiom: format!("P1-{name}"),
                    events: vec![e.bits()],
                    lhs: got,
                    rhs: want,
                });
            }
        }
    }
    let n1 = p1.len() as u64;
    report.absorb("P1", 4, p1, n1);

    let pow3 = 3u64.pow(k as u32);
    let (found, total) = scan(pow3, |i| {
        let (a, b) = nested_pair(i, k);
        violation("P2-lower", &[a, b], sf.lower(a), sf.lower(b))
            .or_else(|| violation("P2-upper", &[a, b], sf.upper(a), sf.upper(b)))
    });
    report.absorb("P2", pow3, found, total);

    let pairs = 1u64 << (2 * k);
    let (found, total) = scan(pairs, |i| {
        let a = Event::from_bits(i & ((1 << k) - 1));
        let b = Event::from_bits(i >> k);
        violation(
            "P3",
            &[a, b],
            sf.upper(a.union(b)),
            sf.upper(a) + sf.upper(b),
        )
    });
    report.absorb("P3", pairs, found, total);

    let (found, total) = scan(pow3, |i| {
        let (a, b) = disjoint_pair(i, k);
        violation(
            "P4",
            &[a, b],
            sf.lower(a) + sf.lower(b),
            sf.lower(a.union(b)),
        )
    });
    report.absorb("P4", pow3, found, total);

    let events = 1u64 << k;
    let (found, total) = scan(events, |i| {
        let a = Event::from_bits(i);
        let sum = sf.lower(a) + sf.upper(a.complement(k));
        ((sum - 1.0).abs() > AXIOM_TOLERANCE).then(|| AxiomViolation {
            axiom: "conjugacy".into(),
            events: vec![a.bits()],
            lhs: sum,
            rhs: 1.0,
        })
    });
    report.absorb("conjugacy", events, found, total);
    Ok(report)
}

/// P2-P4 and conjugacy restricted to pairs drawn from a supplied event list (for large `k`).
pub fn check_p_axioms_on(sf: &dyn SetFunction, events: &[Event]) -> AxiomReport {
    let k = sf.k();
    let mut report = AxiomReport::new(k);
    let m = events.len() as u64;
    let (found, total) = scan(m * m, |i| {
        let (a, b) = (events[(i / m) as usize], events[(i % m) as usize]);
        let mono = if a.is_subset_of(b) {
            violation("P2-lower", &[a, b], sf.lower(a), sf.lower(b))
                .or_else(|| violation("P2-upper", &[a, b], sf.upper(a), sf.upper(b)))
        } else {
            None
        };
        mono.or_else(|| {
            violation(
                "P3",
                &[a, b],
                sf.upper(a.union(b)),
                sf.upper(a) + sf.upper(b),
            )
        })
        .or_else(|| {
            if a.is_disjoint(b) {
                violation(
                    "P4",
                    &[a, b],
                    sf.lower(a) + sf.lower(b),
                    sf.lower(a.union(b)),
                )
            } else {
                None
            }
        })
    });
    report.absorb("P2-P4 sampled", m * m, found, total);
    let (found, total) = scan(m, |i| {
        let a = events[i as usize];
        let sum = sf.lower(a) + sf.upper(a.complement(k));
        ((sum - 1.0).abs() > AXIOM_TOLERANCE).then(|| AxiomViolation {
            axiom: "conjugacy".into(),
            events: vec![a.bits()],
            lhs: sum,
            rhs: 1.0,
        })
    });
    report.absorb("conjugacy", m, found, total);
    report
}

/// `d(A, B) = upper(A symmetric-difference B)`.
pub fn typicality_distance(sf: &dyn SetFunction, a: Event, b: Event) -> f64 {
    sf.upper(a.symmetric_difference(b))
}

/// Largest `k` for the exhaustive T5 check (`16^k` quadruples).
pub const MAX_T5_K: usize = 6;

/// Exhaustive check of the typicality-distance axioms T1-T5 and of
/// `T_a(A) = 1 - lower(A) = d(A^c, empty)`.
pub fn check_t_axioms(sf: &dyn SetFunction) -> Result<AxiomReport> {
    let k = sf.k();
    if k > MAX_T5_K {
        return Err(Error::InvalidArgument(format!(
            "exhaustive typicality checks need k <= {MAX_T5_K}"
        )));
    }
    let d = |a: Event, b: Event| typicality_distance(sf, a, b);
    let full = Event::full(k);
    let empty = Event::EMPTY;
    let size = 1u64 << k;
    let mask = size - 1;
    let mut report = AxiomReport::new(k);

    let pow3 = 3u64.pow(k as u32);
    let (found, total) = scan(pow3, |i| {
        let (a, a2) = nested_pair(i, k);
        violation("T1", &[a, a2], d(a, empty), d(a2, empty))
    });
    report.absorb("T1", pow3, found, total);

    let t2 = d(full, empty);
    let bad = (t2 - 1.0).abs() > AXIOM_TOLERANCE;
    let w = if bad {
        vec![AxiomViolation {
            axiom: "T2".into(),
            events: vec![full.bits(), 0],
            lhs: t2,
            rhs: 1.0,
        }]
    } else {
        vec![]
    };
    report.absorb("T2", 1, w, u64::from(bad));

    let (found, total) = scan(size, |i| {
        let a = Event::from_bits(i);
        let (l, r) = (d(a, full), d(a.complement(k), empty));
        ((l - r).abs() > AXIOM_TOLERANCE).then(|| AxiomViolation {
            axiom: "T3".into(),
            events: vec![a.bits()],
            lhs: l,
            rhs: r,
        })
    });
    report.absorb("T3", size, found, total);

    let triples = 1u64 << (3 * k);
    let (found, total) = scan(triples, |i| {
        let a1 = Event::from_bits(i & mask);
        let a2 = Event::from_bits((i >> k) & mask);
        let b = Event::from_bits(i >> (2 * k));
        violation(
            "T4",
            &[a1, a2, b],
            d(a1.intersection(a2), b),
            d(a1, b) + d(a2, b),
        )
    });
    report.absorb("T4", triples, found, total);

    let quads = 1u64 << (4 * k);
    let (found, total) = scan(quads, |i| {
        let a1 = Event::from_bits(i & mask);
        let a2 = Event::from_bits((i >> k) & mask);
        let b1 = Event::from_bits((i >> (2 * k)) & mask);
        let b2 = Event::from_bits(i >> (3 * k));
        violation(
            "T5",
            &[a1, a2, b1, b2],
            d(a1.intersection(a2), b1.intersection(b2)),
            d(a1, b1) + d(a2, b2),
        )
    });
    report.absorb("T5", quads, found, total);

    let (found, total) = scan(size, |i| {
        let a = Event::from_bits(i);
        let ta = 1.0 - sf.lower(a);
        let via_d = d(a.complement(k), empty);
        ((ta - via_d).abs() > AXIOM_TOLERANCE).then(|| AxiomViolation {
            axiom: "Ta".into(),
            events: vec![a.bits()],
            lhs: ta,
            rhs: via_d,
        })
    });
    report.absorb("Ta", size, found, total);
    Ok(report)
}

/// `A_1 x .. x A_n x Omega x Omega x ..`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rectangle(pub Vec<Event>);

impl Rectangle {
    pub fn new(sides: Vec<Event>) -> Self {
        Rectangle(sides)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The rectangle with `shift` copies of `Omega` prepended.
    pub fn shifted(&self, shift: usize, k: usize) -> Rectangle {
        let mut sides = vec![Event::full(k); shift];
        sides.extend_from_slice(&self.0);
        Rectangle(sides)
    }
}

/// `inf over m_i in M of prod m_i(A_i)`, which factorizes into `prod lower(A_i)`.
pub fn rectangle_lower_prob(sf: &dyn SetFunction, rect: &Rectangle) -> f64 {
    rect.0.iter().map(|&a| sf.lower(a)).product()
}

pub fn rectangle_upper_prob(sf: &dyn SetFunction, rect: &Rectangle) -> f64 {
    rect.0.iter().map(|&a| sf.upper(a)).product()
}

/// Whether prepending `shift` whole-space factors leaves the rectangle value unchanged.
pub fn shift_rectangle_invariance(sf: &dyn SetFunction, rect: &Rectangle, shift: usize) -> bool {
    let base = rectangle_lower_prob(sf, rect);
    let moved = rectangle_lower_prob(sf, &rect.shifted(shift, sf.k()));
    (base - moved).abs() <= AXIOM_TOLERANCE
}
