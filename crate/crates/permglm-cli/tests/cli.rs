//! End-to-end runs of the compiled binary: every subcommand, every exit
//! code, and the determinism guarantees a scripted pipeline relies on.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn permglm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_permglm"))
}

fn run(args: &[&str]) -> Output {
    permglm().args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Simulates a small dataset into `dir` and returns the data/design paths.
fn simulate(dir: &Path, model: &str, sigma: &str, seed: &str) -> (String, String) {
    let out = dir.join(format!("sim_{model}_{seed}"));
    let output = run(&[
        "simulate",
        "--model",
        model,
        "--error",
        "a",
        "--sigma",
        sigma,
        "--width",
        "9",
        "--subjects-per-group",
        "6",
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    (
        out.join("dataset.csv").to_str().unwrap().to_string(),
        out.join("design.csv").to_str().unwrap().to_string(),
    )
}

fn read_sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn a_null_run_reports_every_method_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m0", "0.8", "11");
    let out = tmp.path().join("run");
    let output = run(&[
        "test",
        "--data",
        &data,
        "--design",
        &design,
        "--permutations",
        "199",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);

    let text = fs::read_to_string(out.join("results.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let p_values = json["p_values"].as_object().unwrap();
    assert_eq!(p_values.len(), 5);
    for name in ["fmax", "pmin", "erl", "cont", "area"] {
        let p = p_values[name].as_f64().unwrap();
        assert!(
            (1.0 / 200.0..=1.0).contains(&p),
            "{name}: p = {p} outside [1/200, 1]"
        );
        assert!(out.join(format!("envelope_{name}.csv")).is_file());
        assert!(out.join(format!("rejected_{name}.csv")).is_file());
    }
    assert_eq!(json["n_permutations"], 199);
    assert_eq!(json["seed"], 3);
}

#[test]
fn a_planted_signal_exits_two_with_the_floor_pvalue() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m1", "0.15", "4");
    let out = tmp.path().join("run");
    let output = run(&[
        "test",
        "--data",
        &data,
        "--design",
        &design,
        "--methods",
        "fmax,erl",
        "--permutations",
        "199",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("REJECTED"), "stdout:\n{stdout}");

    let text = fs::read_to_string(out.join("results.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    // A signal this strong saturates the test: p sits at its floor 1/(J+1).
    assert_eq!(json["p_values"]["fmax"].as_f64().unwrap(), 1.0 / 200.0);
    let rejected = fs::read_to_string(out.join("rejected_fmax.csv")).unwrap();
    assert!(rejected.lines().count() > 1, "no rejected rows:\n{rejected}");
}

#[test]
fn reruns_and_thread_counts_leave_the_output_bytes_unchanged() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m0", "0.5", "7");
    let mut dirs = Vec::new();
    for (name, threads) in [("a", "2"), ("b", "2"), ("c", "1")] {
        let out = tmp.path().join(name);
        let output = run(&[
            "--threads",
            threads,
            "test",
            "--data",
            &data,
            "--design",
            &design,
            "--permutations",
            "99",
            "--seed",
            "12",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(matches!(output.status.code(), Some(0) | Some(2)));
        dirs.push(out);
    }
    let first = read_sorted_files(&dirs[0]);
    assert!(first.iter().any(|(name, _)| name == "results.json"));
    for dir in &dirs[1..] {
        assert_eq!(first, read_sorted_files(dir), "{} differs", dir.display());
    }
}

#[test]
fn the_streaming_switch_does_not_change_the_answer() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m1", "0.6", "9");
    let mut dirs = Vec::new();
    for (name, switch) in [("on", "on"), ("off", "off")] {
        let out = tmp.path().join(name);
        let output = run(&[
            "test",
            "--data",
            &data,
            "--design",
            &design,
            "--permutations",
            "99",
            "--seed",
            "5",
            "--streaming",
            switch,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(matches!(output.status.code(), Some(0) | Some(2)));
        dirs.push(out);
    }
    assert_eq!(read_sorted_files(&dirs[0]), read_sorted_files(&dirs[1]));
}

#[test]
fn envelope_export_reproduces_the_recorded_run() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m1", "0.3", "2");
    let out = tmp.path().join("run");
    let output = run(&[
        "test",
        "--data",
        &data,
        "--design",
        &design,
        "--permutations",
        "99",
        "--seed",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(output.status.code(), Some(0) | Some(2)));
    let results = out.join("results.json");

    let export = tmp.path().join("export");
    let output = run(&[
        "envelope-export",
        "--data",
        &data,
        "--design",
        &design,
        "--results",
        results.to_str().unwrap(),
        "--out",
        export.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    for name in ["fmax", "pmin", "erl", "cont", "area"] {
        assert_eq!(
            fs::read(out.join(format!("envelope_{name}.csv"))).unwrap(),
            fs::read(export.join(format!("envelope_{name}.csv"))).unwrap(),
            "{name} export differs from the original run"
        );
    }
}

#[test]
fn envelope_export_refuses_a_foreign_seed_or_dataset() {
    let tmp = TempDir::new().unwrap();
    let (data, design) = simulate(tmp.path(), "m0", "0.5", "21");
    let out = tmp.path().join("run");
    let output = run(&[
        "test",
        "--data",
        &data,
        "--design",
        &design,
        "--permutations",
        "99",
        "--seed",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let results = out.join("results.json");

    let export = tmp.path().join("bad_seed");
    let output = run(&[
        "envelope-export",
        "--data",
        &data,
        "--design",
        &design,
        "--results",
        results.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        export.to_str().unwrap(),
    ]);
    assert_code(&output, 1);
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("does not match the recorded run"),
        "stderr:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(!export.exists(), "failed export must not leave outputs");

    // A different dataset cannot reproduce the recorded p-values.
    let (other_data, _) = simulate(tmp.path(), "m0", "0.5", "22");
    let export = tmp.path().join("bad_data");
    let output = run(&[
        "envelope-export",
        "--data",
        &other_data,
        "--design",
        &design,
        "--results",
        results.to_str().unwrap(),
        "--out",
        export.to_str().unwrap(),
    ]);
    assert_code(&output, 1);
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("does not match the recorded run"),
        "stderr:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn usage_mistakes_exit_one_never_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    // Missing input file.
    let output = run(&[
        "test",
        "--data",
        "/nonexistent/data.csv",
        "--design",
        "/nonexistent/design.csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 1);
    // Unparseable flag value.
    let output = run(&["test", "--data", "x", "--design", "y", "--streaming", "maybe", "--out", "z"]);
    assert_code(&output, 1);
    // Unknown subcommand.
    assert_code(&run(&["frobnicate"]), 1);
    // Bad thread count from the environment.
    let output = permglm()
        .env("PERMGLM_THREADS", "lots")
        .args(["simulate", "--model", "m0", "--error", "a", "--sigma", "1", "--width", "9", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_code(&output, 1);
}

#[test]
fn help_and_version_are_successes() {
    assert_code(&run(&["--help"]), 0);
    assert_code(&run(&["--version"]), 0);
    assert_code(&run(&["test", "--help"]), 0);
}

#[test]
fn experiment_writes_the_rate_table() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{
  "model": "m1",
  "error_kind": "a",
  "sigmas": [0.4],
  "grid": { "width": 9, "height": 9 },
  "subjects_per_group": 5,
  "permutations": 99,
  "replicates": 50,
  "alpha": 0.05,
  "methods": ["fmax", "erl"],
  "seed": 7
}
"#,
    )
    .unwrap();
    let out = tmp.path().join("exp");
    let output = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let table = fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("model,error,sigma,fmax,erl"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("m1,a,0.4,"), "row: {row}");
    assert!(out.join("reports.json").is_file());

    // Exactly one of --config and --preset must be given.
    let output = run(&["experiment", "--out", out.to_str().unwrap()]);
    assert_code(&output, 1);
}
