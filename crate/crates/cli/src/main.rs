//! `imprecise-lab` command-line front end.
//!
//! Exit codes: 0 when every pass flag holds, 1 when any check fails, 2 on
//! configuration or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imprecise_lab::frequency::{wf_trace, FreqTracker};
use imprecise_lab::generator::{sample_parallel, OutcomeSequence};
use imprecise_lab::imprecision::{
    check_p_axioms, check_t_axioms, EnvelopePair, SetFunction, TableSetFunction, MAX_T5_K,
};
use imprecise_lab::io::{read_outcomes, write_measures, write_outcomes, CsvSink};
use imprecise_lab::scenario::{self, ExperimentConfig, Overrides, ScenarioError};
use imprecise_lab::selection::{selected_freq, track_rules};
use imprecise_lab::{CredalSet, Event, Gamble, KappaFn, Measure, RuleSpec, SelectionRule};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "imprecise-lab",
    version,
    about = "Simulate and analyse data drawn from sets of probability measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario's measure stream to CSV.
    BuildSeq {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample outcomes from a scenario's measure stream.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative frequencies and window-estimator traces of an outcome CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Number of outcomes; inferred from the data when omitted.
        #[arg(long)]
        k: Option<usize>,
        /// Outcome whose indicator is traced.
        #[arg(long, default_value_t = 0)]
        outcome: usize,
        #[arg(long, default_value = "sqrt")]
        kappa: KappaFn,
        #[arg(long, default_value_t = 1000)]
        stride: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Subsequence frequencies of an outcome CSV under selection rules.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Rule such as `odd`, `mod:3,1`, `bit:4,1`, `squares`, `explicit:file`.
        #[arg(long = "rule", required = true)]
        rules: Vec<RuleSpec>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Axiom reports for a credal set envelope or an explicit upper-probability table.
    Coherence {
        /// Members separated by `;`, weights by `,`: `0.3,0.7;0.6,0.4`.
        #[arg(long, conflicts_with = "upper")]
        credal: Option<String>,
        /// Upper values of all 2^k events in bitmask order, separated by `,`.
        #[arg(long)]
        upper: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario presets and config-driven runs.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List the presets.
    List,
    /// Validate a config file.
    Validate { config: PathBuf },
    /// Run a preset or a config file.
    Run {
        /// Preset id (ignored when --config is given).
        id: Option<String>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Preset id.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of positions (defaults to the config horizon).
    #[arg(short = 'n', long)]
    horizon: Option<u64>,
}

#[derive(Args)]
struct OverrideArgs {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(short = 'n', long)]
    horizon: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seeds: a.seeds,
            horizon: a.horizon,
            burn_in: a.burn_in,
            output_dir: a.out_dir,
        }
    }
}

enum Failure {
    /// Checks ran and at least one failed.
    Checks,
    Config(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<imprecise_lab::Error> for Failure {
    fn from(e: imprecise_lab::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load(
    scenario_id: Option<&str>,
    config: Option<&Path>,
    overrides: Overrides,
) -> Result<ExperimentConfig, Failure> {
    let text = match (config, scenario_id) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        (None, Some(id)) => json!({ "scenario": id }).to_string(),
        (None, None) => return Err(Failure::Config("give a scenario id or --config".into())),
    };
    Ok(scenario::resolve(&text, &overrides)?)
}

fn source_config(source: &Source) -> Result<ExperimentConfig, Failure> {
    let overrides = Overrides {
        horizon: source.horizon,
        burn_in: source.horizon.map(|_| 1),
        ..Default::default()
    };
    load(
        source.scenario.as_deref(),
        source.config.as_deref(),
        overrides,
    )
}

fn infer_k(outcomes: &[u8], k: Option<usize>) -> Result<usize, Failure> {
    let seen = outcomes.iter().max().map_or(0, |&m| m as usize + 1);
    match k {
        Some(k) if k < seen => Err(Failure::Config(format!(
            "--k {k} but outcome {} occurs",
            seen - 1
        ))),
        Some(k) => Ok(k),
        None => Ok(seen.max(2)),
    }
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json serializes")
    );
}

fn write_report(out: Option<&Path>, value: &serde_json::Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_rows(s: &str) -> Result<Vec<Vec<f64>>, Failure> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Config(format!("bad number `{x}`")))
                })
                .collect()
        })
        .collect()
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::BuildSeq { source, out } => {
            let cfg = source_config(&source)?;
            let stream = scenario::stream_for(&cfg)?;
            write_measures(&out, stream.as_ref(), cfg.horizon)?;
            Ok(())
        }
        Command::Simulate { source, seed, out } => {
            let cfg = source_config(&source)?;
            let stream = scenario::stream_for(&cfg)?;
            let seq = sample_parallel(stream.as_ref(), seed, cfg.horizon)?;
            write_outcomes(&out, &seq)?;
            Ok(())
        }
        Command::Analyze {
            input,
            k,
            outcome,
            kappa,
            stride,
            out_dir,
        } => {
            let outcomes = read_outcomes(&input)?;
            let k = infer_k(&outcomes, k)?;
            if outcome >= k {
                return Err(Failure::Config(format!(
                    "--outcome {outcome} out of range for k = {k}"
                )));
            }
            let seq = OutcomeSequence::new(k, 0, input.display().to_string(), outcomes)?;
            let mut cols = vec!["n".to_string()];
            cols.extend((0..k).map(|j| format!("r{j}")));
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut sink = CsvSink::create(&out_dir.join("freq.csv"), &cols)?;
            let mut t = FreqTracker::new(k);
            let total = seq.outcomes.len() as u64;
            for &o in &seq.outcomes {
                t.update(o)?;
                if t.n().is_multiple_of(stride.max(1)) || t.n() == total {
                    let mut row = vec![t.n().to_string()];
                    row.extend(t.relative_freq()?.weights().iter().map(f64::to_string));
                    sink.row(row)?;
                }
            }
            sink.finish()?;
            let gamble = Gamble::indicator(Event::singleton(outcome), k);
            let trace = wf_trace(&seq.outcomes, &gamble, kappa, stride)?;
            let mut sink = CsvSink::create(
                &out_dir.join("wf.csv"),
                &["n", "average", "wf_lower", "wf_upper"],
            )?;
            for &(n, a, lo, hi) in &trace {
                sink.row([n.to_string(), a.to_string(), lo.to_string(), hi.to_string()])?;
            }
            sink.finish()?;
            let last = trace.last().copied();
            print_json(&json!({
                "n": t.n(),
                "k": k,
                "relative_freq": t.relative_freq().ok().map(|m| m.weights().to_vec()),
                "wf_lower": last.map(|x| x.2),
                "wf_upper": last.map(|x| x.3),
            }));
            Ok(())
        }
        Command::Select {
            input,
            k,
            rules,
            out,
        } => {
            let outcomes = read_outcomes(&input)?;
            let k = infer_k(&outcomes, k)?;
            let resolved: Vec<SelectionRule> = rules
                .iter()
                .map(RuleSpec::resolve_index_only)
                .collect::<Result<_, _>>()?;
            let trackers = track_rules(&resolved, k, &outcomes)?;
            let mut rows = Vec::new();
            for (rule, t) in resolved.iter().zip(&trackers) {
                let freq = selected_freq(t).ok().map(|m| m.weights().to_vec());
                rows.push(json!({ "rule": rule.describe(), "selected": t.selected_n, "relative_freq": freq }));
            }
            if let Some(path) = &out {
                let mut cols = vec!["rule".to_string(), "selected".to_string()];
                cols.extend((0..k).map(|j| format!("r{j}")));
                let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
                let mut sink = CsvSink::create(path, &cols)?;
                for (rule, t) in resolved.iter().zip(&trackers) {
                    let mut row = vec![rule.describe(), t.selected_n.to_string()];
                    match selected_freq(t) {
                        Ok(m) => row.extend(m.weights().iter().map(f64::to_string)),
                        Err(_) => row.extend(std::iter::repeat_n(String::new(), k)),
                    }
                    sink.row(row)?;
                }
                sink.finish()?;
            }
            print_json(&json!({ "n": outcomes.len(), "rules": rows }));
            Ok(())
        }
        Command::Coherence { credal, upper, out } => {
            let sf: Box<dyn SetFunction> = match (credal, upper) {
                (Some(c), None) => {
                    let members = parse_rows(&c)?
                        .into_iter()
                        .map(Measure::new)
                        .collect::<Result<Vec<_>, _>>()?;
                    Box::new(EnvelopePair::new(CredalSet::new(members)?))
                }
                (None, Some(u)) => {
                    let values = parse_rows(&u)?.concat();
                    let k = values.len().trailing_zeros() as usize;
                    if !values.len().is_power_of_two() || k < 1 {
                        return Err(Failure::Config(format!(
                            "--upper needs 2^k values, got {}",
                            values.len()
                        )));
                    }
                    Box::new(TableSetFunction::from_upper(k, values)?)
                }
                _ => {
                    return Err(Failure::Config(
                        "give exactly one of --credal or --upper".into(),
                    ))
                }
            };
            let p = check_p_axioms(sf.as_ref())?;
            let t = if sf.k() <= MAX_T5_K {
                Some(check_t_axioms(sf.as_ref())?)
            } else {
                None
            };
            let pass = p.pass() && t.as_ref().is_none_or(|t| t.pass());
            write_report(
                out.as_deref(),
                &json!({ "k": sf.k(), "pass": pass, "p_axioms": p, "t_axioms": t }),
            )?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for p in scenario::list_scenarios() {
                    println!(
                        "{:<18} {}\n{:<18} demonstrates: {}",
                        p.id, p.description, "", p.demonstrates
                    );
                }
                Ok(())
            }
            ScenarioAction::Validate { config } => {
                let text = std::fs::read_to_string(&config)
                    .map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
                scenario::resolve(&text, &Overrides::default())?;
                println!("{}: ok", config.display());
                Ok(())
            }
            ScenarioAction::Run {
                id,
                overrides,
                config,
            } => {
                let cfg = load(id.as_deref(), config.as_deref(), overrides.into())?;
                let summary = scenario::run_scenario(&cfg)?;
                for c in summary.all_checks() {
                    println!(
                        "{} {} = {} ({})",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.condition
                    );
                }
                println!("summary: {}", cfg.output_dir.join("summary.json").display());
                if summary.pass {
                    Ok(())
                } else {
                    Err(Failure::Checks)
                }
            }
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
