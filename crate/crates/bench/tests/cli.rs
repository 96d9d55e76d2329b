use std::fs;
use std::path::Path;
use std::process::Command;

use minmin_bench::trace::{read_trace, TRACE_COLUMNS};
use minmin_bench::{run_experiment, ExperimentConfig, RunOptions};

const SMALL: &str = r#"
name = "small"
methods = ["mixed_unconstrained", "joint_fgm", "atmi3_only", "bilevel_only"]
eps = [1e-3, 1e-4]
repetitions = 2

[problem]
seed = 3
m = 6
n = 3
mu_x = 0.5
mu_y = 0.1
sigma = 0.01
coupling = 0.05
linear_scale = 0.3
inner_radius = 0.5
inner_start = 0.2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minmin-bench"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let opts = RunOptions {
        jobs: 2,
        out: Some(dir.path().join("a")),
        seed_override: None,
    };
    let report = run_experiment(&cfg, &opts).unwrap();
    assert_eq!(report.exit_code(), 0, "{:?}", report.outcomes.iter().map(|o| &o.error).collect::<Vec<_>>());
    assert_eq!(report.outcomes.len(), 4 * 2 * 2);
    let out = dir.path().join("a");
    for f in ["trace.csv", "cells.csv", "summary.csv", "summary.txt", "traces/cell-0000.csv", "traces/cell-0015.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let merged = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(merged.lines().next().unwrap(), TRACE_COLUMNS.join(","));
    assert_eq!(report.summary.rows.len(), 4 * 2);
    for row in &report.summary.rows {
        assert_eq!(row.runs, 2);
        assert!(row.final_gap_median <= row.eps, "{row:?}");
        assert_eq!(row.relative_cost.is_some(), row.method == "mixed_unconstrained");
    }

    // identical traces on a second run, regardless of thread count
    let again = run_experiment(&cfg, &RunOptions { jobs: 1, out: Some(dir.path().join("b")), seed_override: None }).unwrap();
    assert_eq!(again.exit_code(), 0);
    let second = fs::read_to_string(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(merged, second);

    // a different base seed changes the instances
    let other = run_experiment(&cfg, &RunOptions { jobs: 0, out: Some(dir.path().join("c")), seed_override: Some(11) }).unwrap();
    assert_eq!(other.exit_code(), 0);
    assert_ne!(merged, fs::read_to_string(dir.path().join("c/trace.csv")).unwrap());
}

#[test]
fn compact_driver_against_joint_baseline() {
    // negligible quartic term and a small ball keep the oracle floor below the target
    let text = SMALL
        .replace(r#"["mixed_unconstrained", "joint_fgm", "atmi3_only", "bilevel_only"]"#, r#"["mixed_compact", "joint_fgm"]"#)
        .replace("sigma = 0.01", "sigma = 0.0")
        .replace("coupling = 0.05", "coupling = 0.02")
        .replace("linear_scale = 0.3", "linear_scale = 0.03")
        .replace("inner_radius = 0.5", "inner_radius = 0.01")
        .replace("repetitions = 2", "repetitions = 1");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, &RunOptions { jobs: 0, out: Some(dir.path().to_path_buf()), seed_override: None }).unwrap();
    assert_eq!(report.exit_code(), 0, "{:?}", report.outcomes.iter().map(|o| &o.error).collect::<Vec<_>>());
    for row in &report.summary.rows {
        assert!(row.final_gap_median <= row.eps, "{row:?}");
    }
}

#[test]
fn fixed_iteration_grid_emits_requested_pairs() {
    let text = SMALL
        .replace(r#"methods = ["mixed_unconstrained", "joint_fgm", "atmi3_only", "bilevel_only"]"#, r#"methods = ["atmi3_only"]"#)
        .replace("repetitions = 2", "repetitions = 1\niterations = [2, 4, 8]");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, &RunOptions { jobs: 1, out: Some(dir.path().to_path_buf()), seed_override: None }).unwrap();
    let rows = read_trace(&dir.path().join("traces/cell-0000.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![2, 4, 8]);
    assert!(rows.windows(2).all(|w| w[1].f_gap <= w[0].f_gap));
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), &SMALL.replace("eps = [1e-3, 1e-4]", "eps = []"));
    let out = bin().args(["run", empty.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let missing = bin().args(["run", dir.path().join("nope.toml").to_str().unwrap()]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let small = SMALL.replace(r#"["mixed_unconstrained", "joint_fgm", "atmi3_only", "bilevel_only"]"#, r#"["joint_fgm", "mixed_unconstrained"]"#);
    let cfg = write_config(dir.path(), &small.replace("repetitions = 2", "repetitions = 1"));
    let run_dir = dir.path().join("run");
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--jobs", "2", "--out", run_dir.to_str().unwrap(), "--seed-override", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rel_cost"));

    let pattern = format!("{}/traces/*.csv", run_dir.display());
    let sum_dir = dir.path().join("sum");
    let out = bin().args(["summarize", &pattern, "--out", sum_dir.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(sum_dir.join("summary.csv")).unwrap(),
        fs::read_to_string(run_dir.join("summary.csv")).unwrap()
    );

    fs::write(dir.path().join("bad.csv"), "run_id,method\nx,y\n").unwrap();
    let bad = bin().args(["summarize", dir.path().join("bad.csv").to_str().unwrap()]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let none = bin().args(["summarize", dir.path().join("*.nothing").to_str().unwrap()]).output().unwrap();
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_three() {
    // an inner ball too small for the requested accuracy makes the compact driver refuse
    let text = SMALL
        .replace(r#"["mixed_unconstrained", "joint_fgm", "atmi3_only", "bilevel_only"]"#, r#"["mixed_compact"]"#)
        .replace("eps = [1e-3, 1e-4]", "eps = [1e-14]")
        .replace("repetitions = 2", "repetitions = 1");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &text);
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = fs::read_to_string(dir.path().join("o/cells.csv")).unwrap();
    assert!(cells.contains("failed"));
}
