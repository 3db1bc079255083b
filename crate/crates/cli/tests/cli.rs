//! End-to-end CLI behavior: flags, output formats, config precedence and
//! exit codes.

use std::io::Write;
use std::process::{Command, Output};

fn qstale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qstale"))
        .args(args)
        .env_remove("QSTALE_SEED")
        .output()
        .expect("binary runs")
}

fn qstale_with_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qstale"))
        .args(args)
        .env_remove("QSTALE_SEED")
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    assert!(
        output.status.success(),
        "expected success, got {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).expect("valid JSON")
}

fn csv_rows(output: &Output) -> Vec<Vec<String>> {
    let text = stdout(output);
    text.lines()
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn pmf_csv_reference_table() {
    let out = qstale(&["pmf", "--n", "3", "--w", "1", "--lambda", "1", "--t", "1", "--format", "csv"]);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], vec!["n", "w", "lambda", "t", "j", "xi", "s", "probability"]);
    assert_eq!(rows.len(), 4);
    let expected = [(1, 0.135335), (2, 0.465088), (3, 0.399576)];
    for (row, (s, p)) in rows[1..].iter().zip(expected) {
        assert_eq!(row[6], s.to_string());
        let value: f64 = row[7].parse().unwrap();
        assert!((value - p).abs() < 1e-6, "s={s}: {value}");
        // Rows echo their inputs.
        assert_eq!(row[0], "3");
        assert_eq!(row[1], "1");
    }
}

#[test]
fn pmf_degenerate_single_row() {
    let out = qstale(&["pmf", "--n", "3", "--w", "3", "--lambda", "1", "--t", "0", "--format", "csv"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][6], "3");
    assert_eq!(rows[1][7], "1");
}

#[test]
fn pmf_at_read_table() {
    let out = qstale(&[
        "pmf", "--n", "3", "--w", "1", "--lambda", "1", "--t", "0", "--at-read-j", "1", "--xi", "1",
    ]);
    let record = json(&out);
    assert_eq!(record["schema_version"], "1");
    assert_eq!(record["command"], "pmf");
    assert_eq!(record["inputs"]["j"], 1);
    let support = record["results"]["support"].as_array().unwrap();
    assert_eq!(support[0]["s"], 1);
    assert!((support[0]["probability"].as_f64().unwrap() - 0.6).abs() < 1e-9);
}

#[test]
fn pmf_validation_exit_codes() {
    let out = qstale(&["pmf", "--n", "3", "--w", "0", "--lambda", "1", "--t", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("1 <= W"), "{}", stderr(&out));

    let out = qstale(&["pmf", "--n", "3", "--w", "1", "--lambda", "0", "--t", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("positive"), "{}", stderr(&out));

    let out = qstale(&["pmf", "--n", "3", "--w", "1", "--lambda", "1", "--t", "0", "--at-read-j", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--xi"), "{}", stderr(&out));

    let out = qstale(&["pmf", "--n", "3", "--w", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--t"), "{}", stderr(&out));
}

#[test]
fn pmf_numerical_instability_exit_code() {
    // At the edge of the supported replica range the alternating sums can
    // exceed the probability tolerance; that must surface as exit 4.
    let out = qstale(&["pmf", "--n", "20", "--w", "1", "--lambda", "1", "--t", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("instability"), "{}", stderr(&out));
}

#[test]
fn staleness_anchor_values() {
    let out = qstale(&["staleness", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0"]);
    let record = json(&out);
    assert_eq!(record["results"]["probability"].as_f64().unwrap(), 0.5);
    assert!((record["results"]["bound"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
    assert_eq!(record["results"]["method"], "closed_form");

    let out = qstale(&["staleness", "--n", "3", "--w", "1", "--r", "2", "--lambda", "1", "--xi", "1", "--t", "0"]);
    let record = json(&out);
    assert!((record["results"]["probability"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-9);
    assert!((record["results"]["bound"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn staleness_strict_quorum_is_zero() {
    let out = qstale(&["staleness", "--n", "3", "--w", "2", "--r", "2", "--lambda", "1", "--xi", "1", "--t", "0"]);
    let record = json(&out);
    assert_eq!(record["results"]["probability"].as_f64().unwrap(), 0.0);
}

#[test]
fn staleness_unsupported_closed_form_exits_3() {
    let out = qstale(&[
        "staleness", "--n", "5", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--method", "closed",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("closed form"), "{}", stderr(&out));

    let out = qstale(&[
        "staleness", "--n", "6", "--w", "1", "--r", "3", "--lambda", "1", "--xi", "1", "--t", "0",
        "--method", "general",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn staleness_general_matches_closed_on_three_replicas() {
    let closed = qstale(&["staleness", "--n", "3", "--w", "2", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "1", "--method", "closed"]);
    let general = qstale(&["staleness", "--n", "3", "--w", "2", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "1", "--method", "general"]);
    let p_closed = json(&closed)["results"]["probability"].as_f64().unwrap();
    let p_general = json(&general)["results"]["probability"].as_f64().unwrap();
    assert!((p_closed - p_general).abs() < 1e-9);
}

#[test]
fn staleness_sweep_emits_grid_rows() {
    let out = qstale(&[
        "staleness", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1",
        "--t-sweep", "0:1:0.5", "--format", "csv",
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let ts: Vec<&str> = rows[1..].iter().map(|r| r[5].as_str()).collect();
    assert_eq!(ts, vec!["0", "0.5", "1"]);
    // p_t decreases along the sweep.
    let ps: Vec<f64> = rows[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(ps[0] > ps[1] && ps[1] > ps[2]);
}

#[test]
fn staleness_sim_method_reports_interval() {
    let out = qstale(&[
        "staleness", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--method", "sim", "--trials", "200000", "--seed", "5",
    ]);
    let record = json(&out);
    assert_eq!(record["results"]["method"], "monte_carlo");
    let p = record["results"]["probability"].as_f64().unwrap();
    assert!((p - 0.5).abs() < 0.01);
    assert!(record["results"]["ci95_halfwidth"].as_f64().unwrap() > 0.0);
    assert_eq!(record["inputs"]["trials"], 200000);
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let args = [
        "simulate", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--trials", "50000", "--seed", "42",
    ];
    let first = qstale(&args);
    let second = qstale(&args);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn simulate_strict_quorum_estimate_is_zero() {
    let out = qstale(&[
        "simulate", "--n", "3", "--w", "3", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--trials", "10000", "--seed", "1",
    ]);
    let record = json(&out);
    assert_eq!(record["results"]["estimate"].as_f64().unwrap(), 0.0);
    assert_eq!(record["results"]["stale_count"], 0);
}

#[test]
fn simulate_accepts_shifted_delays() {
    let out = qstale(&[
        "simulate", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--trials", "10000", "--seed", "1", "--write-shift", "0.5", "--read-shift", "0.25",
    ]);
    let record = json(&out);
    assert_eq!(record["inputs"]["write_shift"].as_f64().unwrap(), 0.5);
    let p = record["results"]["estimate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn tune_trivial_target_prefers_minimal_quorums() {
    let out = qstale(&["tune", "--n", "3", "--lambda", "1", "--xi", "1", "--epsilon", "1.0"]);
    let record = json(&out);
    let pareto = record["results"]["pareto"].as_array().unwrap();
    assert_eq!(pareto.len(), 1);
    assert_eq!(pareto[0]["w"], 1);
    assert_eq!(pareto[0]["r"], 1);
    assert_eq!(pareto[0]["t_min"].as_f64().unwrap(), 0.0);
}

#[test]
fn tune_includes_wide_read_partial_quorum() {
    let out = qstale(&[
        "tune", "--n", "3", "--lambda", "1", "--xi", "1", "--epsilon", "0.1", "--t-max", "0",
    ]);
    let record = json(&out);
    let pareto = record["results"]["pareto"].as_array().unwrap();
    let entry = pareto
        .iter()
        .find(|e| e["w"] == 1 && e["r"] == 2)
        .expect("W=1, R=2 on the frontier");
    assert_eq!(entry["t_min"].as_f64().unwrap(), 0.0);
    assert_eq!(entry["method"], "closed_form");
}

#[test]
fn tune_tight_instant_target_leaves_strict_quorums() {
    let out = qstale(&[
        "tune", "--n", "3", "--lambda", "1", "--xi", "1", "--epsilon", "1e-9", "--t-max", "0",
    ]);
    let record = json(&out);
    let pareto = record["results"]["pareto"].as_array().unwrap();
    assert!(!pareto.is_empty());
    for entry in pareto {
        let w = entry["w"].as_u64().unwrap();
        let r = entry["r"].as_u64().unwrap();
        assert!(w + r > 3, "({w}, {r}) is not strict");
    }
}

#[test]
fn tune_rejects_bad_epsilon() {
    let out = qstale(&["tune", "--n", "3", "--lambda", "1", "--xi", "1", "--epsilon", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("(0, 1]"), "{}", stderr(&out));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "n = 3\nw = 1\nlambda = 1.0\nt = 1.0").unwrap();
    let path = file.path().to_str().unwrap();

    let from_file = qstale(&["pmf", "--config", path, "--format", "csv"]);
    let rows = csv_rows(&from_file);
    assert_eq!(rows.len(), 4);
    let p: f64 = rows[1][7].parse().unwrap();
    assert!((p - 0.135335).abs() < 1e-6);

    // The flag wins over the file value.
    let overridden = qstale(&["pmf", "--config", path, "--w", "3", "--t", "0", "--format", "csv"]);
    let rows = csv_rows(&overridden);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][7], "1");
}

#[test]
fn config_file_rejects_unknown_keys() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "n = 3\nwq = 1").unwrap();
    let out = qstale(&["pmf", "--config", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("wq"), "{}", stderr(&out));
}

#[test]
fn env_var_provides_default_seed() {
    let base = [
        "simulate", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0",
        "--trials", "20000",
    ];
    let with_env = qstale_with_env(&base, "QSTALE_SEED", "42");
    let mut with_flag_args = base.to_vec();
    with_flag_args.extend(["--seed", "42"]);
    let with_flag = qstale(&with_flag_args);
    assert_eq!(with_env.stdout, with_flag.stdout);

    // An explicit flag beats the environment.
    let mut other_seed = base.to_vec();
    other_seed.extend(["--seed", "7"]);
    let flag_wins = qstale_with_env(&other_seed, "QSTALE_SEED", "42");
    let direct = qstale(&other_seed);
    assert_eq!(flag_wins.stdout, direct.stdout);

    let bad = qstale_with_env(&base, "QSTALE_SEED", "not-a-number");
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn csv_and_json_carry_identical_numbers() {
    let args = ["staleness", "--n", "3", "--w", "2", "--r", "1", "--lambda", "0.25", "--xi", "4", "--t", "0.7"];
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);

    let record = json(&qstale(&json_args));
    let rows = csv_rows(&qstale(&csv_args));
    let json_p = record["results"]["probability"].as_f64().unwrap();
    let json_bound = record["results"]["bound"].as_f64().unwrap();
    let csv_p: f64 = rows[1][6].parse().unwrap();
    let csv_bound: f64 = rows[1][7].parse().unwrap();
    assert_eq!(json_p, csv_p);
    assert_eq!(json_bound, csv_bound);
}

#[test]
fn output_is_newline_terminated() {
    let out = qstale(&["staleness", "--n", "3", "--w", "1", "--r", "1", "--lambda", "1", "--xi", "1", "--t", "0"]);
    assert!(stdout(&out).ends_with('\n'));
    let out = qstale(&["pmf", "--n", "3", "--w", "1", "--lambda", "1", "--t", "1", "--format", "csv"]);
    assert!(stdout(&out).ends_with('\n'));
}
