//! Geometry and algebra on the probability simplex.
//!
//! A [`Measure`] is a point of the simplex over `k` outcomes, a [`CredalSet`]
//! is a finite list of measures and a [`TargetPath`] is a polyline inside the
//! convex hull of a credal set, given by convex weights over its members.
//!
//! Two constructions carry most of the weight here:
//!
//! - [`caratheodory_approximate`] turns a convex combination of members into a
//!   finite block of `v` members whose plain average lies within `4(k+1)/v`
//!   of the target point. The support of the weights is first reduced to an
//!   affinely independent subset, then each member is repeated
//!   `floor(v * weight)` times and the block is padded with member 0.
//! - [`build_cover_chain`] discretizes a polyline into centers that are both
//!   an `eps`-cover of the polyline and an `eps`-chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;

/// Slack allowed when validating user supplied probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

fn validate_weights(weights: &[f64], min_len: usize) -> Result<f64> {
    if weights.len() < min_len {
        return Err(Error::TooFewOutcomes(weights.len()));
    }
    let mut sum = 0.0;
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeWeight { index, value });
        }
        sum += value;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotNormalized(sum));
    }
    Ok(sum)
}

/// A probability measure on `k >= 2` outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Measure(Vec<f64>);

impl Measure {
    /// Validates and renormalizes a probability vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = validate_weights(&weights, 2)?;
        Ok(Measure(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Wraps a vector that is a simplex point by construction (e.g. an average of measures).
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!(weights.len() >= 2);
        Measure(weights)
    }

    pub fn dirac(k: usize, outcome: usize) -> Result<Self> {
        if outcome >= k {
            return Err(Error::OutcomeOutOfRange { outcome, k });
        }
        let mut w = vec![0.0; k];
        w[outcome] = 1.0;
        Measure::new(w)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Measure::new(vec![1.0 / k as f64; k])
    }

    /// A two-outcome coin with the given probability of outcome 0 ("heads").
    pub fn coin(heads: f64) -> Result<Self> {
        Measure::new(vec![heads, 1.0 - heads])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, event: Event) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(j, _)| event.contains(*j))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn expectation(&self, gamble: &Gamble) -> Result<f64> {
        check_dim(self.k(), gamble.k())?;
        Ok(self.0.iter().zip(gamble.values()).map(|(p, x)| p * x).sum())
    }
}

impl TryFrom<Vec<f64>> for Measure {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Measure::new(v)
    }
}

impl From<Measure> for Vec<f64> {
    fn from(m: Measure) -> Self {
        m.0
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A bounded real function on the outcomes, read as a loss vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Gamble(Vec<f64>);

impl Gamble {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if values.is_empty() {
            return Err(Error::TooFewOutcomes(0));
        }
        Ok(Gamble(values))
    }

    pub fn indicator(event: Event, k: usize) -> Self {
        Gamble(event.indicator(k))
    }

    pub fn constant(k: usize, c: f64) -> Result<Self> {
        Gamble::new(vec![c; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn value(&self, outcome: usize) -> f64 {
        self.0[outcome]
    }

    pub fn neg(&self) -> Gamble {
        Gamble(self.0.iter().map(|v| -v).collect())
    }

    pub fn add(&self, other: &Gamble) -> Result<Gamble> {
        check_dim(self.k(), other.k())?;
        Ok(Gamble(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Gamble {
        Gamble(self.0.iter().map(|v| v * c).collect())
    }
}

impl TryFrom<Vec<f64>> for Gamble {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Gamble::new(v)
    }
}

impl From<Gamble> for Vec<f64> {
    fn from(g: Gamble) -> Self {
        g.0
    }
}

/// Convex weights over the members of a credal set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConvexWeights(Vec<f64>);

impl ConvexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = validate_weights(&weights, 1)?;
        Ok(ConvexWeights(
            weights.into_iter().map(|w| w / sum).collect(),
        ))
    }

    /// All mass on member `index`.
    pub fn vertex(len: usize, index: usize) -> Self {
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        ConvexWeights(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &ConvexWeights, t: f64) -> ConvexWeights {
        ConvexWeights(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for ConvexWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ConvexWeights::new(v)
    }
}

impl From<ConvexWeights> for Vec<f64> {
    fn from(w: ConvexWeights) -> Self {
        w.0
    }
}

/// A finite, nonempty set of measures over the same outcome space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Measure>", into = "Vec<Measure>")]
pub struct CredalSet {
    members: Vec<Measure>,
    k: usize,
}

impl CredalSet {
    pub fn new(members: Vec<Measure>) -> Result<Self> {
        let k = members.first().ok_or(Error::EmptyCredalSet)?.k();
        for m in &members {
            check_dim(k, m.k())?;
        }
        Ok(CredalSet { members, k })
    }

    /// The vertices `e_1, .., e_k` of the simplex.
    pub fn simplex_vertices(k: usize) -> Result<Self> {
        CredalSet::new(
            (0..k)
                .map(|j| Measure::dirac(k, j))
                .collect::<Result<_>>()?,
        )
    }

    /// The two coins with heads probability 1/3 and 2/3.
    pub fn coin_pair() -> Self {
        CredalSet::new(vec![
            Measure::coin(1.0 / 3.0).unwrap(),
            Measure::coin(2.0 / 3.0).unwrap(),
        ])
        .unwrap()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Measure] {
        &self.members
    }

    pub fn member(&self, index: usize) -> &Measure {
        &self.members[index]
    }

    /// The point `sum_j w_j m_j` of the convex hull.
    pub fn combine(&self, weights: &ConvexWeights) -> Result<Measure> {
        check_dim(self.len(), weights.len())?;
        let mut out = vec![0.0; self.k];
        for (m, &w) in self.members.iter().zip(weights.weights()) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(m.weights()) {
                *o += w * p;
            }
        }
        Ok(Measure::from_raw(out))
    }

    /// Plain average of the members referenced by `entries`.
    pub fn average_of(&self, entries: &[usize]) -> Measure {
        let mut counts = vec![0u64; self.len()];
        for &e in entries {
            counts[e] += 1;
        }
        self.average_of_counts(&counts)
    }

    pub(crate) fn average_of_counts(&self, counts: &[u64]) -> Measure {
        let total: u64 = counts.iter().sum();
        let mut out = vec![0.0; self.k];
        for (m, &c) in self.members.iter().zip(counts) {
            if c == 0 {
                continue;
            }
            let w = c as f64 / total as f64;
            for (o, p) in out.iter_mut().zip(m.weights()) {
                *o += w * p;
            }
        }
        Measure::from_raw(out)
    }
}

impl TryFrom<Vec<Measure>> for CredalSet {
    type Error = Error;
    fn try_from(v: Vec<Measure>) -> Result<Self> {
        CredalSet::new(v)
    }
}

impl From<CredalSet> for Vec<Measure> {
    fn from(c: CredalSet) -> Self {
        c.members
    }
}

/// Euclidean distance between two measures.
pub fn distance(p: &Measure, q: &Measure) -> Result<f64> {
    check_dim(p.k(), q.k())?;
    Ok(euclid(p.weights(), q.weights()))
}

pub(crate) fn euclid(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Average of the concatenation of a block of length `u` with average `a_avg`
/// and a block of length `v` with average `b_avg`.
pub fn concat_average(a_avg: &Measure, u: u64, b_avg: &Measure, v: u64) -> Result<Measure> {
    check_dim(a_avg.k(), b_avg.k())?;
    if v == 0 {
        return Err(Error::InvalidArgument(
            "concatenated block must be nonempty".into(),
        ));
    }
    if u == 0 {
        return Ok(b_avg.clone());
    }
    let total = (u + v) as f64;
    let (wa, wb) = (u as f64 / total, v as f64 / total);
    Ok(Measure::from_raw(
        a_avg
            .weights()
            .iter()
            .zip(b_avg.weights())
            .map(|(a, b)| wa * a + wb * b)
            .collect(),
    ))
}

/// A finite sequence of credal set members together with its average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteBlock {
    entries: Vec<usize>,
    average: Measure,
}

impl FiniteBlock {
    pub fn new(credal: &CredalSet, entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("block must be nonempty".into()));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e >= credal.len()) {
            return Err(Error::InvalidArgument(format!(
                "block entry {bad} out of range for {} members",
                credal.len()
            )));
        }
        let average = credal.average_of(&entries);
        Ok(FiniteBlock { entries, average })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn average(&self) -> &Measure {
        &self.average
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reduces convex weights to an affinely independent support with the same combination.
///
/// Repeatedly finds an affine dependence `mu` among the supported members
/// (`sum mu_j m_j = 0`, `sum mu_j = 0`) and moves along it until one weight hits zero.
pub fn reduce_support(credal: &CredalSet, weights: &ConvexWeights) -> Result<ConvexWeights> {
    check_dim(credal.len(), weights.len())?;
    let mut lambda = weights.weights().to_vec();
    loop {
        let support: Vec<usize> = (0..lambda.len()).filter(|&j| lambda[j] > 0.0).collect();
        let Some(mu) = affine_dependence(credal, &support) else {
            break;
        };
        let mut step = f64::INFINITY;
        let mut hit = usize::MAX;
        for (pos, &j) in support.iter().enumerate() {
            if mu[pos] > 0.0 {
                let t = lambda[j] / mu[pos];
                if t < step {
                    step = t;
                    hit = j;
                }
            }
        }
        debug_assert!(hit != usize::MAX);
        for (pos, &j) in support.iter().enumerate() {
            lambda[j] = (lambda[j] - step * mu[pos]).max(0.0);
        }
        lambda[hit] = 0.0;
    }
    let sum: f64 = lambda.iter().sum();
    Ok(ConvexWeights(lambda.into_iter().map(|w| w / sum).collect()))
}

/// Nonzero `mu` over `support` with `sum mu_j m_j = 0` and `sum mu_j = 0`, if one exists.
fn affine_dependence(credal: &CredalSet, support: &[usize]) -> Option<Vec<f64>> {
    let cols = support.len();
    if cols < 2 {
        return None;
    }
    let rows = credal.k() + 1;
    let mut a: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            support
                .iter()
                .map(|&j| {
                    if r < credal.k() {
                        credal.member(j).weights()[r]
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();

    // Reduced row echelon form with partial pivoting.
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (best, best_abs) = (row..rows)
            .map(|r| (r, a[r][col].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs < 1e-10 {
            continue;
        }
        a.swap(row, best);
        let p = a[row][col];
        for c in 0..cols {
            a[row][c] /= p;
        }
        for r in 0..rows {
            if r != row && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..cols {
                    a[r][c] -= f * a[row][c];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
    let mut mu = vec![0.0; cols];
    mu[free] = 1.0;
    for (r, &pc) in pivot_cols.iter().enumerate() {
        mu[pc] = -a[r][free];
    }
    Some(mu)
}

/// A block of `v` members whose average is within `4(k+1)/v` of the point given by `q`.
pub fn caratheodory_approximate(
    credal: &CredalSet,
    q: &ConvexWeights,
    v: usize,
) -> Result<FiniteBlock> {
    if v == 0 {
        return Err(Error::InvalidArgument(
            "block length must be at least 1".into(),
        ));
    }
    let reduced = reduce_support(credal, q)?;
    let mut entries = Vec::with_capacity(v);
    for (j, &w) in reduced.weights().iter().enumerate() {
        // The nudge absorbs products like 3 * (1/3) landing just below an integer.
        let count = ((v as f64) * w + 1e-9).floor() as usize;
        entries.extend(std::iter::repeat_n(j, count));
    }
    debug_assert!(entries.len() <= v);
    entries.resize(v, 0);
    FiniteBlock::new(credal, entries)
}

/// A polyline inside the convex hull of a credal set.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetPath {
    waypoints: Vec<ConvexWeights>,
    points: Vec<Measure>,
}

impl TargetPath {
    pub fn new(credal: &CredalSet, waypoints: Vec<ConvexWeights>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::EmptyPath);
        }
        let points = waypoints
            .iter()
            .map(|w| credal.combine(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(TargetPath { waypoints, points })
    }

    /// Builds a path from raw weight vectors, validating each as convex weights.
    pub fn from_weights(credal: &CredalSet, waypoints: Vec<Vec<f64>>) -> Result<Self> {
        let w = waypoints
            .into_iter()
            .map(ConvexWeights::new)
            .collect::<Result<Vec<_>>>()?;
        TargetPath::new(credal, w)
    }

    /// Polyline through arbitrary measures, expressed over the simplex vertices.
    pub fn through_points(points: &[Measure]) -> Result<(CredalSet, Self)> {
        let first = points.first().ok_or(Error::EmptyPath)?;
        let credal = CredalSet::simplex_vertices(first.k())?;
        let w = points.iter().map(|p| p.weights().to_vec()).collect();
        let path = TargetPath::from_weights(&credal, w)?;
        Ok((credal, path))
    }

    pub fn waypoints(&self) -> &[ConvexWeights] {
        &self.waypoints
    }

    pub fn points(&self) -> &[Measure] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points[0].k()
    }

    pub fn reversed(&self) -> TargetPath {
        TargetPath {
            waypoints: self.waypoints.iter().rev().cloned().collect(),
            points: self.points.iter().rev().cloned().collect(),
        }
    }

    /// Euclidean arc length.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|s| euclid(s[0].weights(), s[1].weights()))
            .sum()
    }

    /// Exact distance from `p` to the polyline.
    pub fn distance_to(&self, p: &Measure) -> f64 {
        self.distance_to_weights(p.weights())
    }

    /// Same as [`TargetPath::distance_to`] for a raw coordinate vector.
    pub fn distance_to_weights(&self, p: &[f64]) -> f64 {
        if self.points.len() == 1 {
            return euclid(p, self.points[0].weights());
        }
        self.points
            .windows(2)
            .map(|s| point_segment_distance(p, s[0].weights(), s[1].weights()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points along the polyline with consecutive spacing at most `spacing`, endpoints included.
    pub fn sample(&self, spacing: f64) -> Vec<Measure> {
        let mut out = vec![self.points[0].clone()];
        for s in self.points.windows(2) {
            let len = euclid(s[0].weights(), s[1].weights());
            let steps = (len / spacing).ceil().max(1.0) as usize;
            for j in 1..=steps {
                let t = j as f64 / steps as f64;
                out.push(Measure::from_raw(lerp(s[0].weights(), s[1].weights(), t)));
            }
        }
        out
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect()
}

pub(crate) fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|x| x * x).sum();
    if len2 == 0.0 {
        return euclid(p, a);
    }
    let t = p
        .iter()
        .zip(a)
        .zip(&ab)
        .map(|((pi, ai), d)| (pi - ai) * d)
        .sum::<f64>()
        / len2;
    let t = t.clamp(0.0, 1.0);
    p.iter()
        .zip(a)
        .zip(&ab)
        .map(|((pi, ai), d)| {
            let e = pi - (ai + t * d);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Ordered centers on `path` forming an `eps`-cover that is also an `eps`-chain.
///
/// Each segment is subdivided uniformly at spacing at most `eps / 2`, waypoints
/// are kept and coincident consecutive centers are dropped. Centers lie on the
/// path itself, so they are within any `zeta >= 0` of it.
pub fn build_cover_chain(path: &TargetPath, eps: f64, zeta: f64) -> Result<Vec<ConvexWeights>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(zeta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zeta must be nonnegative, got {zeta}"
        )));
    }
    let spacing = eps / 2.0;
    let w = path.waypoints();
    let p = path.points();
    let mut centers = vec![w[0].clone()];
    for s in 0..w.len() - 1 {
        let len = euclid(p[s].weights(), p[s + 1].weights());
        if len <= 1e-15 {
            continue;
        }
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for j in 1..=steps {
            centers.push(w[s].lerp(&w[s + 1], j as f64 / steps as f64));
        }
    }
    Ok(centers)
}

/// Symmetric Hausdorff distance between a point cloud and a polyline.
///
/// The cloud-to-path direction is exact; the path-to-cloud direction uses a
/// sampling of the path at `spacing`.
pub fn hausdorff_to_path(cloud: &[Measure], path: &TargetPath, spacing: f64) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud".into()));
    }
    check_dim(path.k(), cloud[0].k())?;
    let forward = cloud
        .iter()
        .map(|c| path.distance_to(c))
        .fold(0.0, f64::max);
    let backward = path
        .sample(spacing)
        .iter()
        .map(|s| {
            cloud
                .iter()
                .map(|c| euclid(s.weights(), c.weights()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(forward.max(backward))
}

/// Euclidean distance from `p` to the convex hull of the credal set.
///
/// Projected gradient descent on the hull weights; accurate to roughly `1e-7`.
pub fn distance_to_hull(credal: &CredalSet, p: &Measure) -> Result<f64> {
    check_dim(credal.k(), p.k())?;
    let n = credal.len();
    let mut lambda = vec![1.0 / n as f64; n];
    // Lipschitz constant of the gradient is at most 2 * sum ||m_j||^2 <= 2n.
    let step = 1.0 / (2.0 * n as f64);
    let residual = |lambda: &[f64]| -> Vec<f64> {
        let mut r: Vec<f64> = p.weights().iter().map(|x| -x).collect();
        for (m, &l) in credal.members().iter().zip(lambda) {
            for (ri, mi) in r.iter_mut().zip(m.weights()) {
                *ri += l * mi;
            }
        }
        r
    };
    let mut best = f64::INFINITY;
    for _ in 0..5000 {
        let r = residual(&lambda);
        let d = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.min(d);
        if d < 1e-12 {
            break;
        }
        let grad: Vec<f64> = credal
            .members()
            .iter()
            .map(|m| 2.0 * m.weights().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let moved: Vec<f64> = lambda
            .iter()
            .zip(&grad)
            .map(|(l, g)| l - step * g)
            .collect();
        lambda = project_to_simplex(&moved);
    }
    Ok(best)
}

/// Euclidean projection onto the probability simplex (sort-based algorithm).
pub(crate) fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|x| (x - theta).max(0.0)).collect()
}
