use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imprecise-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn list_shows_presets() {
    let o = run(&["scenario", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in [
        "alternating-coins",
        "weird-coin",
        "path-builder",
        "slow-divergence",
        "local-estimation",
        "coherence",
    ] {
        assert!(text.contains(id), "{id} missing");
    }
}

#[test]
fn passing_scenario_exits_zero_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for rep in ["a", "b"] {
        let out = dir.path().join(rep);
        let o = run(&[
            "scenario",
            "run",
            "alternating-coins",
            "--seeds",
            "1,2",
            "-n",
            "20000",
            "--out-dir",
            p(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("PASS"));
        csvs.push(std::fs::read(out.join("rules_seed2.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn failing_checks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // A tolerance no sampled frequency can meet.
    std::fs::write(
        &cfg,
        r#"{"scenario": "alternating-coins", "horizon": 1000, "tolerance": 1e-12}"#,
    )
    .unwrap();
    let o = run(&[
        "scenario",
        "run",
        "--config",
        p(&cfg),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "run", "weird-coins"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weird-coin"), "{}", stderr(&o));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"scenario": "weird-coin", "seeds": []}"#).unwrap();
    let o = run(&["scenario", "validate", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seeds"));

    std::fs::write(&cfg, r#"{"scenario": "weird-coin"}"#).unwrap();
    assert_eq!(
        run(&["scenario", "validate", p(&cfg)]).status.code(),
        Some(0)
    );
}

#[test]
fn simulate_analyze_select_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let outcomes = dir.path().join("outcomes.csv");
    let o = run(&[
        "simulate",
        "--scenario",
        "alternating-coins",
        "-n",
        "30000",
        "--seed",
        "4",
        "--out",
        p(&outcomes),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = std::fs::read(&outcomes).unwrap();
    run(&[
        "simulate",
        "--scenario",
        "alternating-coins",
        "-n",
        "30000",
        "--seed",
        "4",
        "--out",
        p(&outcomes),
    ]);
    assert_eq!(first, std::fs::read(&outcomes).unwrap());

    let o = run(&[
        "analyze",
        "--input",
        p(&outcomes),
        "--out-dir",
        p(&dir.path().join("an")),
        "--stride",
        "500",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["n"], 30000);
    let heads = report["relative_freq"][0].as_f64().unwrap();
    assert!((heads - 0.5).abs() < 0.01);
    let wf = std::fs::read_to_string(dir.path().join("an/wf.csv")).unwrap();
    assert_eq!(wf.lines().nth(1), Some("n,average,wf_lower,wf_upper"));
    assert_eq!(wf.lines().count(), 2 + 60);

    let table = dir.path().join("rules.csv");
    let o = run(&[
        "select",
        "--input",
        p(&outcomes),
        "--rule",
        "odd",
        "--rule",
        "even",
        "--out",
        p(&table),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let odd = report["rules"][0]["relative_freq"][0].as_f64().unwrap();
    assert!((odd - 1.0 / 3.0).abs() < 0.02);
    assert!(std::fs::read_to_string(&table)
        .unwrap()
        .starts_with("# imprecise-lab v0.1.0 schema=1\n"));

    let o = run(&[
        "select",
        "--input",
        p(&outcomes),
        "--rule",
        "near:0.5;0.5,0.1,0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_seq_writes_measures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = run(&[
        "build-seq",
        "--scenario",
        "weird-coin",
        "-n",
        "8",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let members: Vec<&str> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    // Second most significant bit of 1..=8.
    assert_eq!(members, ["0", "0", "1", "0", "0", "1", "1", "0"]);
    let o = run(&["build-seq", "--scenario", "coherence", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coherence_reports() {
    let o = run(&[
        "coherence",
        "--credal",
        "0.3333333333333333,0.6666666666666667;0.6666666666666667,0.3333333333333333",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], true);

    // upper({a}) = upper({b}) = 0.1, upper({a, b}) = 0.3 over two outcomes, with Omega = {a, b}.
    let o = run(&["coherence", "--upper", "0,0.1,0.1,0.3"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["p_axioms"]["violation_count"].as_u64().unwrap() > 0);

    assert_eq!(
        run(&["coherence", "--upper", "0,0.5,1"]).status.code(),
        Some(2)
    );
}
