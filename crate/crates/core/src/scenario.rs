//! Experiment presets, JSON configs and the runner that turns a config into
//! CSV data plus a summary JSON.
//!
//! Config values are resolved in three layers: preset defaults, then the
//! fields present in the config document, then command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::builder::{SequenceBuilder, ToleranceSchedule};
use crate::error::{Error, Result};
use crate::event::Event;
use crate::frequency::{running_means, wf_trace, AverageHistory, FreqTracker, TailCloud};
use crate::generator::{sample_parallel, OutcomeSequence};
use crate::imprecision::{
    check_p_axioms, check_t_axioms, EnvelopePair, TableSetFunction, MAX_EXHAUSTIVE_K, MAX_T5_K,
};
use crate::io::CsvSink;
use crate::kappa::KappaFn;
use crate::selection::{
    estimate_m_hat, fierens_fine_check, max_coordinate_diff, selected_freq, theoretical_mean,
    track_rules, RuleSpec, SelectionRule,
};
use crate::simplex::{CredalSet, Gamble, Measure, TargetPath};
use crate::stream::{CyclicStream, MaterializedStream, MeasureStream, WeirdCoinStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub eps_decay: f64,
    pub delta_decay: f64,
    #[serde(default)]
    pub zeta0: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            eps_decay: 0.5,
            delta_decay: 0.5,
            zeta0: 0.0,
        }
    }
}

impl ScheduleSpec {
    pub fn for_k(&self, k: usize) -> ToleranceSchedule {
        ToleranceSchedule {
            k,
            eps_decay: self.eps_decay,
            delta_decay: self.delta_decay,
            zeta0: self.zeta0,
        }
    }
}

/// A fully resolved experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Credal set members, one probability vector each.
    pub credal: Vec<Vec<f64>>,
    /// Target path waypoints as convex weights over the credal members.
    pub path: Vec<Vec<f64>>,
    pub schedule: ScheduleSpec,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    /// First index of the tail window.
    pub burn_in: u64,
    pub kappa: KappaFn,
    pub rules: Vec<RuleSpec>,
    /// Row spacing of time-series CSVs.
    pub stride: u64,
    pub tolerance: f64,
    /// Tolerance for subsequence frequencies.
    pub rule_tolerance: f64,
    /// Monte-Carlo trials, or random credal sets per seed for `coherence`.
    pub trials: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn credal_set(&self) -> Result<CredalSet> {
        CredalSet::new(
            self.credal
                .iter()
                .map(|w| Measure::new(w.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn target_path(&self, credal: &CredalSet) -> Result<TargetPath> {
        TargetPath::from_weights(credal, self.path.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// A configuration problem located by its field path (`seeds`, `credal[1]`, ..).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Config(Vec<FieldError>),
    Run(Error),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config(errs) => {
                write!(f, "invalid config:")?;
                for e in errs {
                    write!(f, "\n  {}: {}", e.field, e.message)?;
                }
                Ok(())
            }
            ScenarioError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<Error> for ScenarioError {
    fn from(e: Error) -> Self {
        ScenarioError::Run(e)
    }
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(vec![FieldError {
        field: field.into(),
        message: message.into(),
    }])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetInfo {
    pub id: &'static str,
    pub description: &'static str,
    /// The behaviour the preset reproduces.
    pub demonstrates: &'static str,
}

const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        id: "alternating-coins",
        description: "coins 1/3 and 2/3 used alternately",
        demonstrates: "relative frequency of heads converges to 1/2 while odd/even subsequences recover 1/3 and 2/3",
    },
    PresetInfo {
        id: "weird-coin",
        description: "coin choice driven by the second most significant bit of the index",
        demonstrates: "relative frequency of heads oscillates forever between 4/9 and 1/2",
    },
    PresetInfo {
        id: "path-builder",
        description: "deterministic measure sequence whose Cesaro averages trace a target path",
        demonstrates: "cluster set of the averages equals a prescribed connected set, with bounded excursions",
    },
    PresetInfo {
        id: "slow-divergence",
        description: "slow builder variant against a window estimator with kappa(n)",
        demonstrates: "the window min/max estimator keeps a non-collapsing span, so it does not converge",
    },
    PresetInfo {
        id: "local-estimation",
        description: "three coins used cyclically, estimated through selection rules",
        demonstrates: "subsequence frequencies recover the credal members; concentration bound holds",
    },
    PresetInfo {
        id: "coherence",
        description: "axiom checks on random credal envelopes and a non-envelope set function",
        demonstrates: "envelopes satisfy P1-P4, conjugacy and T1-T5; the non-envelope function breaks subadditivity",
    },
];

pub fn list_scenarios() -> &'static [PresetInfo] {
    PRESETS
}

/// Closest preset id by edit distance.
pub fn nearest_scenario(id: &str) -> &'static str {
    PRESETS
        .iter()
        .min_by_key(|p| strsim::levenshtein(id, p.id))
        .map(|p| p.id)
        .expect("catalog is nonempty")
}

fn unknown_scenario(id: &str) -> ScenarioError {
    field_error(
        "scenario",
        format!(
            "unknown scenario `{id}`; did you mean `{}`?",
            nearest_scenario(id)
        ),
    )
}

fn coin_pair_rows() -> Vec<Vec<f64>> {
    vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![2.0 / 3.0, 1.0 / 3.0]]
}

fn vertex_rows(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

/// Default config of a preset.
pub fn preset(id: &str) -> std::result::Result<ExperimentConfig, ScenarioError> {
    let base = ExperimentConfig {
        scenario: id.to_string(),
        credal: coin_pair_rows(),
        path: vec![],
        schedule: ScheduleSpec::default(),
        seeds: vec![1],
        horizon: 100_000,
        burn_in: 1,
        kappa: KappaFn::Sqrt,
        rules: vec![],
        stride: 1000,
        tolerance: 0.01,
        rule_tolerance: 0.02,
        trials: 1000,
        output_dir: PathBuf::from(format!("out/{id}")),
    };
    let cfg = match id {
        "alternating-coins" => ExperimentConfig {
            seeds: (1..=20).collect(),
            rules: vec![
                RuleSpec::Modular { a: 2, b: 1 },
                RuleSpec::Modular { a: 2, b: 0 },
            ],
            ..base
        },
        "weird-coin" => ExperimentConfig {
            seeds: (1..=5).collect(),
            horizon: 1 << 22,
            burn_in: 1 << 18,
            stride: 1 << 12,
            tolerance: 0.02,
            ..base
        },
        "path-builder" => ExperimentConfig {
            credal: vertex_rows(3),
            path: vec![
                vec![0.6, 0.2, 0.2],
                vec![0.2, 0.6, 0.2],
                vec![0.2, 0.2, 0.6],
            ],
            horizon: 10_000_000,
            burn_in: 1_000_000,
            stride: 10_000,
            tolerance: 0.05,
            ..base
        },
        "slow-divergence" => ExperimentConfig {
            // Heads probability from 4/9 to 1/2.
            path: vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.5, 0.5]],
            horizon: 1_000_000,
            burn_in: 100_000,
            stride: 1000,
            tolerance: 0.5,
            ..base
        },
        "local-estimation" => ExperimentConfig {
            credal: vec![vec![0.2, 0.8], vec![0.5, 0.5], vec![0.8, 0.2]],
            seeds: (1..=5).collect(),
            rules: vec![
                RuleSpec::Modular { a: 3, b: 1 },
                RuleSpec::Modular { a: 3, b: 2 },
                RuleSpec::Modular { a: 3, b: 0 },
                RuleSpec::All,
            ],
            horizon: 10_000,
            tolerance: 0.05,
            rule_tolerance: 0.05,
            trials: 200,
            ..base
        },
        "coherence" => ExperimentConfig {
            credal: vertex_rows(4),
            seeds: (1..=4).collect(),
            horizon: 1,
            stride: 1,
            trials: 25,
            tolerance: 1e-12,
            ..base
        },
        other => return Err(unknown_scenario(other)),
    };
    Ok(cfg)
}

/// Command-line values layered over a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub horizon: Option<u64>,
    pub burn_in: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(b) = self.burn_in {
            cfg.burn_in = b;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
    }
}

/// Parses a config document over its preset's defaults (not yet validated).
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ScenarioError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| field_error("$", e.to_string()))?;
    let Value::Object(fields) = doc else {
        return Err(field_error("$", "config must be a JSON object"));
    };
    let id = fields
        .get("scenario")
        .and_then(Value::as_str)
        .ok_or_else(|| field_error("scenario", "missing or not a string"))?;
    let Value::Object(mut merged) = serde_json::to_value(preset(id)?).expect("config serializes")
    else {
        unreachable!("config serializes to an object")
    };
    merged.extend(fields);
    serde_path_to_error::deserialize(Value::Object(merged)).map_err(|e| {
        let path = e.path().to_string();
        field_error(
            if path == "." { "$".into() } else { path },
            e.into_inner().to_string(),
        )
    })
}

pub fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| field_error("$", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Every problem with a config, by field path; empty when valid.
pub fn validate(cfg: &ExperimentConfig) -> Vec<FieldError> {
    let mut errs = Vec::new();
    let mut push = |field: String, message: String| errs.push(FieldError { field, message });
    if !PRESETS.iter().any(|p| p.id == cfg.scenario) {
        push(
            "scenario".into(),
            format!(
                "unknown scenario `{}`; did you mean `{}`?",
                cfg.scenario,
                nearest_scenario(&cfg.scenario)
            ),
        );
    }
    if cfg.seeds.is_empty() {
        push("seeds".into(), "at least one seed is required".into());
    }
    if cfg.horizon == 0 {
        push("horizon".into(), "must be at least 1".into());
    }
    if cfg.burn_in == 0 || cfg.burn_in > cfg.horizon {
        push(
            "burn_in".into(),
            format!("must lie in [1, horizon = {}]", cfg.horizon),
        );
    }
    if cfg.stride == 0 {
        push("stride".into(), "must be at least 1".into());
    }
    if cfg.trials == 0 {
        push("trials".into(), "must be at least 1".into());
    }
    for (name, v) in [
        ("tolerance", cfg.tolerance),
        ("rule_tolerance", cfg.rule_tolerance),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            push(name.into(), format!("must be positive, got {v}"));
        }
    }
    if cfg.credal.is_empty() {
        push("credal".into(), "needs at least one member".into());
    }
    let k = cfg.credal.first().map_or(0, Vec::len);
    for (i, row) in cfg.credal.iter().enumerate() {
        if row.len() != k {
            push(
                format!("credal[{i}]"),
                format!("has {} outcomes, expected {k}", row.len()),
            );
        } else if let Err(e) = Measure::new(row.clone()) {
            push(format!("credal[{i}]"), e.to_string());
        }
    }
    let needs_path = matches!(cfg.scenario.as_str(), "path-builder" | "slow-divergence");
    if needs_path && cfg.path.is_empty() {
        push(
            "path".into(),
            "this scenario needs at least one waypoint".into(),
        );
    }
    for (i, row) in cfg.path.iter().enumerate() {
        if row.len() != cfg.credal.len() {
            push(
                format!("path[{i}]"),
                format!(
                    "has {} weights, expected one per credal member ({})",
                    row.len(),
                    cfg.credal.len()
                ),
            );
        } else if let Err(e) = crate::simplex::ConvexWeights::new(row.clone()) {
            push(format!("path[{i}]"), e.to_string());
        }
    }
    if needs_path {
        if let Err(e) = cfg.schedule.for_k(k).validate() {
            push("schedule".into(), e.to_string());
        }
    }
    for (i, r) in cfg.rules.iter().enumerate() {
        if let RuleSpec::Explicit(p) = r {
            if !Path::new(p).is_file() {
                push(format!("rules[{i}]"), format!("index file `{p}` not found"));
            }
        }
        if let RuleSpec::Near { target, .. } = r {
            if target.len() != k {
                push(
                    format!("rules[{i}]"),
                    format!("target has {} outcomes, expected {k}", target.len()),
                );
            }
        }
    }
    if cfg.scenario == "coherence" && k > MAX_EXHAUSTIVE_K {
        push(
            "credal".into(),
            format!("coherence checks enumerate events and need k <= {MAX_EXHAUSTIVE_K}"),
        );
    }
    errs
}

/// Parses, layers overrides and validates.
pub fn resolve(
    text: &str,
    overrides: &Overrides,
) -> std::result::Result<ExperimentConfig, ScenarioError> {
    let mut cfg = parse_config(text)?;
    overrides.apply(&mut cfg);
    match validate(&cfg) {
        errs if errs.is_empty() => Ok(cfg),
        errs => Err(ScenarioError::Config(errs)),
    }
}

/// The measure stream a scenario samples from, for `build-seq` and `simulate`.
pub fn stream_for(cfg: &ExperimentConfig) -> Result<Box<dyn MeasureStream>> {
    let credal = cfg.credal_set()?;
    Ok(match cfg.scenario.as_str() {
        "weird-coin" => Box::new(WeirdCoinStream::new()),
        "path-builder" | "slow-divergence" => {
            let (stream, _) = build_stream(cfg, &credal)?;
            Box::new(stream)
        }
        "coherence" => {
            return Err(Error::InvalidArgument(
                "the coherence scenario has no measure stream".into(),
            ));
        }
        _ => Box::new(CyclicStream::new(credal)),
    })
}

/// One named pass/fail check of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable condition, e.g. `< 0.01`.
    pub condition: String,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("< {limit}"),
            pass: value < limit,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!("<= {limit}"),
            pass: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            condition: format!(">= {limit}"),
            pass: value >= limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub stats: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    /// Seed-independent checks.
    pub checks: Vec<Check>,
    pub seeds: Vec<SeedSummary>,
    /// Scenario-specific tables (estimated points, concentration cells, ..).
    pub data: Value,
    /// Data files, relative to the output directory.
    pub files: Vec<String>,
    /// Wall-clock time of the run (unix seconds); the only non-deterministic field.
    pub generated_at: u64,
}

impl RunSummary {
    pub fn all_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .chain(self.seeds.iter().flat_map(|s| &s.checks))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Output of one seed's pipeline.
struct SeedRun {
    summary: SeedSummary,
    files: Vec<String>,
}

/// Runs a validated config, writing CSVs and `summary.json` into its output directory.
pub fn run_scenario(cfg: &ExperimentConfig) -> std::result::Result<RunSummary, ScenarioError> {
    let errs = validate(cfg);
    if !errs.is_empty() {
        return Err(ScenarioError::Config(errs));
    }
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let credal = cfg.credal_set()?;
    let (checks, data, mut files, seeds) = match cfg.scenario.as_str() {
        "alternating-coins" | "local-estimation" => run_cyclic(cfg, credal)?,
        "weird-coin" => run_weird(cfg)?,
        "path-builder" => run_builder(cfg, &credal)?,
        "slow-divergence" => run_slow(cfg, &credal)?,
        "coherence" => run_coherence(cfg, &credal)?,
        other => return Err(unknown_scenario(other)),
    };
    files.extend(seeds.iter().flat_map(|s| s.files.iter().cloned()));
    let seeds: Vec<SeedSummary> = seeds.into_iter().map(|s| s.summary).collect();
    let pass = checks
        .iter()
        .chain(seeds.iter().flat_map(|s| &s.checks))
        .all(|c| c.pass);
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        config: cfg.clone(),
        pass,
        checks,
        seeds,
        data,
        files,
        generated_at,
    };
    let path = dir.join("summary.json");
    std::fs::write(&path, summary.to_json())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(summary)
}

type Parts = (Vec<Check>, Value, Vec<String>, Vec<SeedRun>);

fn per_seed<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<SeedRun>>
where
    F: Fn(u64) -> Result<SeedRun> + Sync,
{
    cfg.seeds.par_iter().map(|&s| f(s)).collect()
}

fn coord_columns(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|j| format!("{prefix}{j}")).collect()
}

/// Writes `n, r_0, .., r_{k-1}` every `stride` steps.
fn write_freq_series(path: &Path, seq: &OutcomeSequence, stride: u64) -> Result<()> {
    let mut cols = vec!["n".to_string()];
    cols.extend(coord_columns("r", seq.k));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut sink = CsvSink::create(path, &cols)?;
    let mut t = FreqTracker::new(seq.k);
    let total = seq.outcomes.len() as u64;
    for &o in &seq.outcomes {
        t.update(o)?;
        if t.n().is_multiple_of(stride) || t.n() == total {
            let mut row = vec![t.n().to_string()];
            row.extend(t.relative_freq()?.weights().iter().map(f64::to_string));
            sink.row(row)?;
        }
    }
    sink.finish()
}

fn write_wf(path: &Path, trace: &[(u64, f64, f64, f64)]) -> Result<()> {
    let mut sink = CsvSink::create(path, &["n", "average", "wf_lower", "wf_upper"])?;
    for &(n, a, lo, hi) in trace {
        sink.row([n.to_string(), a.to_string(), lo.to_string(), hi.to_string()])?;
    }
    sink.finish()
}

fn run_cyclic(cfg: &ExperimentConfig, credal: CredalSet) -> Result<Parts> {
    let stream = CyclicStream::new(credal);
    let k = stream.k();
    let n = cfg.horizon;
    let mut all = vec![SelectionRule::All];
    let rules: Vec<SelectionRule> = cfg
        .rules
        .iter()
        .map(|r| r.resolve(&stream, n))
        .collect::<Result<_>>()?;
    all.extend(rules.iter().cloned());
    let means: Vec<Measure> = all
        .iter()
        .map(|r| theoretical_mean(&stream, r, n))
        .collect::<Result<_>>()?;
    let m = n / (stream.credal().len() as u64 + 1);
    let estimating = cfg.scenario == "local-estimation";

    let seeds = per_seed(cfg, |seed| {
        let seq = sample_parallel(&stream, seed, n)?;
        let freq_file = format!("freq_seed{seed}.csv");
        write_freq_series(&cfg.output_dir.join(&freq_file), &seq, cfg.stride)?;
        let trackers = track_rules(&all, k, &seq.outcomes)?;
        let rules_file = format!("rules_seed{seed}.csv");
        let mut cols = vec!["rule".to_string(), "selected".to_string()];
        cols.extend(coord_columns("r", k));
        cols.extend(coord_columns("mu", k));
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut sink = CsvSink::create(&cfg.output_dir.join(&rules_file), &cols)?;
        let mut stats = BTreeMap::new();
        let mut checks = Vec::new();
        for (idx, ((rule, t), mu)) in all.iter().zip(&trackers).zip(&means).enumerate() {
            let r = selected_freq(t)?;
            let mut row = vec![rule.describe(), t.selected_n.to_string()];
            row.extend(r.weights().iter().map(f64::to_string));
            row.extend(mu.weights().iter().map(f64::to_string));
            sink.row(row)?;
            let diff = max_coordinate_diff(&r, mu)?;
            let label = if idx == 0 {
                "aggregate".to_string()
            } else {
                rule.describe()
            };
            stats.insert(format!("{label}.r0"), r.weights()[0]);
            let limit = if idx == 0 {
                cfg.tolerance
            } else {
                cfg.rule_tolerance
            };
            checks.push(Check::below(format!("{label}: max |r - mu|"), diff, limit));
        }
        sink.finish()?;
        let mut files = vec![freq_file, rules_file];
        if estimating {
            let hat = estimate_m_hat(&trackers[1..], m);
            let worst = stream
                .credal()
                .members()
                .iter()
                .map(|member| {
                    hat.iter()
                        .map(|h| max_coordinate_diff(member, h).unwrap_or(1.0))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            stats.insert("m_hat.points".into(), hat.len() as f64);
            checks.push(Check::below(
                "members recovered by M-hat (max distance)",
                worst,
                cfg.tolerance,
            ));
            let hat_file = format!("mhat_seed{seed}.csv");
            let mut sink = CsvSink::create(
                &cfg.output_dir.join(&hat_file),
                &coord_columns("p", k)
                    .iter()
                    .map(String::as_str)
                    .collect::<Vec<_>>(),
            )?;
            for h in &hat {
                sink.row(h.weights().iter().map(f64::to_string))?;
            }
            sink.finish()?;
            files.push(hat_file);
        }
        Ok(SeedRun {
            summary: SeedSummary {
                seed,
                stats,
                checks,
            },
            files,
        })
    })?;

    let mut checks = Vec::new();
    let mut data = json!({ "means": all.iter().zip(&means).map(|(r, mu)| json!({"rule": r.describe(), "mu": mu.weights()})).collect::<Vec<_>>() });
    let mut files = Vec::new();
    if estimating {
        let nc = n.min(10_000);
        let mc = nc / (stream.credal().len() as u64 + 1);
        let mut cells = Vec::new();
        let file = "concentration.csv".to_string();
        let mut sink = CsvSink::create(
            &cfg.output_dir.join(&file),
            &[
                "eps",
                "n",
                "m",
                "rules",
                "trials",
                "violations",
                "frequency",
                "bound",
                "standard_error",
                "pass",
            ],
        )?;
        for eps in [0.05, 0.1] {
            let rep = fierens_fine_check(&stream, &rules, eps, mc, nc, cfg.trials, cfg.seeds[0])?;
            sink.row([
                eps.to_string(),
                nc.to_string(),
                mc.to_string(),
                rules.len().to_string(),
                rep.trials.to_string(),
                rep.violations.to_string(),
                rep.frequency.to_string(),
                rep.bound.to_string(),
                rep.standard_error.to_string(),
                rep.pass.to_string(),
            ])?;
            checks.push(Check::at_most(
                format!("concentration eps={eps}: frequency"),
                rep.frequency,
                rep.bound + 3.0 * rep.standard_error,
            ));
            cells.push(rep);
        }
        sink.finish()?;
        files.push(file);
        data["concentration"] = serde_json::to_value(cells).expect("report serializes");
    }
    Ok((checks, data, files, seeds))
}

fn run_weird(cfg: &ExperimentConfig) -> Result<Parts> {
    let stream = WeirdCoinStream::new();
    let heads = Gamble::indicator(Event::singleton(0), 2);
    let (lo_target, hi_target) = (4.0 / 9.0, 0.5);
    let seeds = per_seed(cfg, |seed| {
        let seq = sample_parallel(&stream, seed, cfg.horizon)?;
        let means = running_means(&seq.outcomes, &heads)?;
        let tail = &means[cfg.burn_in as usize - 1..];
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let freq_file = format!("freq_seed{seed}.csv");
        write_freq_series(&cfg.output_dir.join(&freq_file), &seq, cfg.stride)?;
        let wf_file = format!("wf_seed{seed}.csv");
        write_wf(
            &cfg.output_dir.join(&wf_file),
            &wf_trace(&seq.outcomes, &heads, cfg.kappa, cfg.stride)?,
        )?;
        let stats = BTreeMap::from([("tail_min".to_string(), lo), ("tail_max".to_string(), hi)]);
        let checks = vec![
            Check::below("|tail min - 4/9|", (lo - lo_target).abs(), cfg.tolerance),
            Check::below("|tail max - 1/2|", (hi - hi_target).abs(), cfg.tolerance),
        ];
        Ok(SeedRun {
            summary: SeedSummary {
                seed,
                stats,
                checks,
            },
            files: vec![freq_file, wf_file],
        })
    })?;
    Ok((
        vec![],
        json!({ "target_interval": [lo_target, hi_target] }),
        vec![],
        seeds,
    ))
}

/// Statistics of a deterministic builder run.
struct BuilderRun {
    cloud: TailCloud,
    max_excursion_ratio: f64,
    excursion_violations: u64,
    iterations: u32,
}

/// Runs the configured builder for `horizon` emissions, checking the excursion bound at each.
fn build_stream(
    cfg: &ExperimentConfig,
    credal: &CredalSet,
) -> Result<(MaterializedStream, BuilderRun)> {
    build_stream_traced(cfg, credal, |_, _| Ok(()))
}

fn build_stream_traced<F>(
    cfg: &ExperimentConfig,
    credal: &CredalSet,
    mut trace: F,
) -> Result<(MaterializedStream, BuilderRun)>
where
    F: FnMut(&SequenceBuilder, f64) -> Result<()>,
{
    let path = cfg.target_path(credal)?;
    let schedule = cfg.schedule.for_k(credal.k());
    let mut b = if cfg.scenario == "slow-divergence" {
        SequenceBuilder::slow(credal.clone(), path.clone(), schedule, cfg.kappa)?
    } else {
        SequenceBuilder::new(credal.clone(), path.clone(), schedule)?
    };
    let description = b.describe();
    let mut indices = Vec::with_capacity(cfg.horizon as usize);
    let mut ratio = 0.0f64;
    let mut violations = 0u64;
    let mut failure = None;
    let averages = (0..cfg.horizon).map(|_| {
        indices.push(b.next_index() as u32);
        let d = path.distance_to_weights(b.running_weights());
        let bound = b.excursion_bound();
        ratio = ratio.max(d / bound);
        if d > bound {
            violations += 1;
        }
        if failure.is_none() {
            if let Err(e) = trace(&b, d) {
                failure = Some(e);
            }
        }
        b.running_weights().to_vec()
    });
    let cloud = TailCloud::from_averages(averages, credal.k(), cfg.burn_in, cfg.horizon)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let run = BuilderRun {
        cloud,
        max_excursion_ratio: ratio,
        excursion_violations: violations,
        iterations: b.iteration(),
    };
    Ok((
        MaterializedStream::new(credal.clone(), indices, description)?,
        run,
    ))
}

fn run_builder(cfg: &ExperimentConfig, credal: &CredalSet) -> Result<Parts> {
    let k = credal.k();
    let file = "trajectory.csv".to_string();
    let mut cols = vec![
        "n".to_string(),
        "iteration".to_string(),
        "phase".to_string(),
    ];
    cols.extend(coord_columns("r", k));
    cols.extend(["distance".to_string(), "bound".to_string()]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut sink = CsvSink::create(&cfg.output_dir.join(&file), &cols)?;
    let (stream, run) = build_stream_traced(cfg, credal, |b, d| {
        if b.n() % cfg.stride == 0 || b.n() == cfg.horizon {
            let mut row = vec![
                b.n().to_string(),
                b.iteration().to_string(),
                format!("{:?}", b.phase()),
            ];
            row.extend(b.running_weights().iter().map(f64::to_string));
            row.extend([d.to_string(), b.excursion_bound().to_string()]);
            sink.row(row)?;
        }
        Ok(())
    })?;
    sink.finish()?;
    let path = cfg.target_path(credal)?;
    let hausdorff = run.cloud.hausdorff(&path)?;
    let checks = vec![
        Check::below(
            "tail-cloud Hausdorff distance to target",
            hausdorff,
            cfg.tolerance,
        ),
        Check::at_most(
            "excursion-bound violations",
            run.excursion_violations as f64,
            0.0,
        ),
    ];
    let data = json!({
        "hausdorff": hausdorff,
        "max_excursion_ratio": run.max_excursion_ratio,
        "iterations": run.iterations,
        "coord_min": run.cloud.coord_min,
        "coord_max": run.cloud.coord_max,
    });
    let seeds = per_seed(cfg, |seed| {
        let seq = sample_parallel(&stream, seed, cfg.horizon)?;
        let freq_file = format!("freq_seed{seed}.csv");
        write_freq_series(&cfg.output_dir.join(&freq_file), &seq, cfg.stride)?;
        let sampled = TailCloud::from_outcomes(&seq.outcomes, k, cfg.burn_in, cfg.horizon)?
            .hausdorff(&path)?;
        let stats = BTreeMap::from([("sampled_hausdorff".to_string(), sampled)]);
        Ok(SeedRun {
            summary: SeedSummary {
                seed,
                stats,
                checks: vec![],
            },
            files: vec![freq_file],
        })
    })?;
    Ok((checks, data, vec![file], seeds))
}

/// Window-estimator statistics of a heads-coordinate trace over `[burn_in, n]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanStats {
    pub min_lower: f64,
    pub max_upper: f64,
    /// Smallest `upper - lower` over the window.
    pub min_width: f64,
}

fn span_stats(
    averages: impl Iterator<Item = f64>,
    kappa: KappaFn,
    burn_in: u64,
    mut each: impl FnMut(u64, f64, f64, f64) -> Result<()>,
) -> Result<SpanStats> {
    let mut h = AverageHistory::new(kappa);
    let mut s = SpanStats {
        min_lower: f64::INFINITY,
        max_upper: f64::NEG_INFINITY,
        min_width: f64::INFINITY,
    };
    for a in averages {
        h.push(a);
        let (lo, hi) = h.wf_estimate()?;
        each(h.n(), a, lo, hi)?;
        if h.n() >= burn_in {
            s.min_lower = s.min_lower.min(lo);
            s.max_upper = s.max_upper.max(hi);
            s.min_width = s.min_width.min(hi - lo);
        }
    }
    Ok(s)
}

fn run_slow(cfg: &ExperimentConfig, credal: &CredalSet) -> Result<Parts> {
    let path = cfg.target_path(credal)?;
    let heads: Vec<f64> = path.points().iter().map(|p| p.weights()[0]).collect();
    let (lo_t, hi_t) = (
        heads.iter().cloned().fold(f64::INFINITY, f64::min),
        heads.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let len = hi_t - lo_t;
    let (stream, run) = build_stream(cfg, credal)?;
    let mut averages = Vec::with_capacity(cfg.horizon as usize);
    let mut sum = 0.0;
    for i in 1..=cfg.horizon {
        sum += stream.measure_at(i).weights()[0];
        averages.push(sum / i as f64);
    }
    let file = "wf_exact.csv".to_string();
    let mut sink = CsvSink::create(
        &cfg.output_dir.join(&file),
        &["n", "average", "wf_lower", "wf_upper"],
    )?;
    let exact = span_stats(
        averages.iter().copied(),
        cfg.kappa,
        cfg.burn_in,
        |n, a, lo, hi| {
            if n % cfg.stride == 0 || n == cfg.horizon {
                sink.row([n.to_string(), a.to_string(), lo.to_string(), hi.to_string()])?;
            }
            Ok(())
        },
    )?;
    sink.finish()?;
    let checks = vec![Check::at_least(
        "smallest tail estimator width / target length",
        exact.min_width / len,
        cfg.tolerance,
    )];
    let data = json!({
        "target_interval": [lo_t, hi_t],
        "exact": exact,
        "reaches_lower_end": exact.min_lower <= lo_t + 0.05 * len,
        "reaches_upper_end": exact.max_upper >= hi_t - 0.05 * len,
        "iterations": run.iterations,
        "max_excursion_ratio": run.max_excursion_ratio,
    });
    let gamble = Gamble::indicator(Event::singleton(0), credal.k());
    let seeds = per_seed(cfg, |seed| {
        let seq = sample_parallel(&stream, seed, cfg.horizon)?;
        let trace = wf_trace(&seq.outcomes, &gamble, cfg.kappa, cfg.stride)?;
        let wf_file = format!("wf_seed{seed}.csv");
        write_wf(&cfg.output_dir.join(&wf_file), &trace)?;
        let means = running_means(&seq.outcomes, &gamble)?;
        let s = span_stats(means.into_iter(), cfg.kappa, cfg.burn_in, |_, _, _, _| {
            Ok(())
        })?;
        let stats = BTreeMap::from([
            ("min_lower".to_string(), s.min_lower),
            ("max_upper".to_string(), s.max_upper),
            ("min_width".to_string(), s.min_width),
        ]);
        Ok(SeedRun {
            summary: SeedSummary {
                seed,
                stats,
                checks: vec![],
            },
            files: vec![wf_file],
        })
    })?;
    Ok((checks, data, vec![file], seeds))
}

/// `count` random credal sets with 1 to 5 members over `k` outcomes (uniform on the simplex).
pub fn random_credal_sets(k: usize, count: usize, seed: u64) -> Result<Vec<CredalSet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.random_range(1..=5);
            let members = (0..size)
                .map(|_| {
                    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                    let total: f64 = raw.iter().sum();
                    Measure::new(raw.iter().map(|x| x / total).collect())
                })
                .collect::<Result<_>>()?;
            CredalSet::new(members)
        })
        .collect()
}

/// Upper values 0.1 on two singletons and 0.3 on their union.
pub fn non_envelope_example(k: usize) -> Result<TableSetFunction> {
    let mut singletons = vec![0.1, 0.1];
    singletons.extend(std::iter::repeat_n(1.0, k.saturating_sub(2)));
    TableSetFunction::with_overrides(
        k,
        &singletons,
        &[(Event::singleton(0).union(Event::singleton(1)), 0.3)],
    )
}

fn run_coherence(cfg: &ExperimentConfig, credal: &CredalSet) -> Result<Parts> {
    let k = credal.k();
    let check_t = k <= MAX_T5_K;
    let fixed = EnvelopePair::new(credal.clone());
    let p = check_p_axioms(&fixed)?;
    let mut checks = vec![Check::at_most(
        "configured set: P1-P4/conjugacy violations",
        p.violation_count as f64,
        0.0,
    )];
    let mut data = json!({ "configured": { "p_axioms": p } });
    if check_t {
        let t = check_t_axioms(&fixed)?;
        checks.push(Check::at_most(
            "configured set: T1-T5 violations",
            t.violation_count as f64,
            0.0,
        ));
        data["configured"]["t_axioms"] = serde_json::to_value(t).expect("report serializes");
    }
    let bad = check_p_axioms(&non_envelope_example(k)?)?;
    let p3 = bad.violations_of("P3").count() as f64;
    checks.push(Check::at_least(
        "non-envelope function: P3 witnesses",
        p3,
        1.0,
    ));
    data["non_envelope"] = serde_json::to_value(&bad).expect("report serializes");
    data["typicality_checked"] = json!(check_t);

    let seeds = per_seed(cfg, |seed| {
        let sets = random_credal_sets(k, cfg.trials as usize, seed)?;
        let file = format!("coherence_seed{seed}.csv");
        let mut sink = CsvSink::create(
            &cfg.output_dir.join(&file),
            &["set", "members", "p_violations", "t_violations"],
        )?;
        let (mut pv, mut tv) = (0u64, 0u64);
        for (i, set) in sets.into_iter().enumerate() {
            let members = set.len();
            let env = EnvelopePair::new(set);
            let p = check_p_axioms(&env)?.violation_count;
            let t = if check_t {
                check_t_axioms(&env)?.violation_count
            } else {
                0
            };
            pv += p;
            tv += t;
            sink.row([
                i.to_string(),
                members.to_string(),
                p.to_string(),
                t.to_string(),
            ])?;
        }
        sink.finish()?;
        let stats = BTreeMap::from([("sets".to_string(), cfg.trials as f64)]);
        let checks = vec![
            Check::at_most(
                "random envelopes: P1-P4/conjugacy violations",
                pv as f64,
                0.0,
            ),
            Check::at_most("random envelopes: T1-T5 violations", tv as f64, 0.0),
        ];
        Ok(SeedRun {
            summary: SeedSummary {
                seed,
                stats,
                checks,
            },
            files: vec![file],
        })
    })?;
    Ok((checks, data, vec![], seeds))
}
