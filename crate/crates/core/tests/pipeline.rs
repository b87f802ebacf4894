//! End-to-end tests of the command-line binary: synth -> build-env ->
//! simulate -> calibrate -> evaluate -> report, plus exit codes and
//! reproducibility. Every test runs in its own temporary directory.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crimesim"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary spawns")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is utf-8")
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Minimal config for a synthesized 20x20 city living under `city/`.
const SYNTH_CONFIG: &str = r#"{
  "grid_rows": 20, "grid_cols": 20, "cell_side_m": 100.0,
  "origin_easting": 0.0, "origin_northing": 0.0,
  "crime_csv": "city/crimes.csv",
  "cell_attrs_csv": "city/grid.csv",
  "districts_csv": "city/districts.csv",
  "total_population": 10000,
  "offense_rate": 2e-5,
  "out_dir": "env"
}"#;

fn synth_and_build(dir: &Path) {
    fs::write(dir.join("config.json"), SYNTH_CONFIG).unwrap();
    run_ok(dir, &["--out", "city", "--seed", "7", "synth"]);
    run_ok(dir, &["--config", "config.json", "build-env"]);
}

#[test]
fn synth_outputs_rebuild_identically() {
    let tmp = tempfile::tempdir().unwrap();
    synth_and_build(tmp.path());

    // The rebuilt grid reproduces the synthesized attributes byte for byte.
    assert_eq!(read(tmp.path(), "city/grid.csv"), read(tmp.path(), "env/grid.csv"));

    // Every synthesized record lands in a cell: located = rows in crimes.csv.
    let n_records = read(tmp.path(), "city/crimes.csv").lines().count() - 1;
    let report: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "env/build_report.json")).unwrap();
    assert_eq!(report["located"], n_records as u64);
    assert_eq!(report["dropped_out_of_bounds"], 0);
    assert_eq!(report["n_districts"], 4);
    assert_eq!(report["year_start"], 2010);
    assert_eq!(report["year_end"], 2018);

    // The count table totals match too.
    let counts = read(tmp.path(), "env/counts_by_year.csv");
    let total: u64 = counts
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(2))
        .map(|v| v.parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, n_records as u64);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    synth_and_build(tmp.path());

    let stdout = run_ok(tmp.path(), &["--config", "config.json", "simulate"]);
    assert!(stdout.contains("seed 0"), "seed is echoed: {stdout}");
    let first: Vec<String> = ["counts.csv", "events.csv", "summary.json", "heatmap.pgm"]
        .iter()
        .map(|f| read(tmp.path(), &format!("env/{f}")))
        .collect();

    // Same seed, same bytes.
    run_ok(tmp.path(), &["--config", "config.json", "simulate"]);
    for (f, before) in ["counts.csv", "events.csv", "summary.json", "heatmap.pgm"].iter().zip(&first) {
        assert_eq!(&read(tmp.path(), &format!("env/{f}")), before, "{f} changed across reruns");
    }

    // A different seed changes the outcome and is echoed.
    let stdout = run_ok(tmp.path(), &["--config", "config.json", "--seed", "99", "simulate"]);
    assert!(stdout.contains("seed 99"), "{stdout}");
    assert_ne!(read(tmp.path(), "env/counts.csv"), first[0]);
}

#[test]
fn zero_citizens_writes_header_only_events() {
    let tmp = tempfile::tempdir().unwrap();
    synth_and_build(tmp.path());
    let cfg = SYNTH_CONFIG.replace("\"offense_rate\": 2e-5,", "\"offense_rate\": 2e-5, \"n_citizens\": 0,");
    fs::write(tmp.path().join("config.json"), cfg).unwrap();

    run_ok(tmp.path(), &["--config", "config.json", "simulate"]);
    assert_eq!(read(tmp.path(), "env/events.csv"), "day,slot,row,col,district\n");
    let summary: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "env/summary.json")).unwrap();
    assert_eq!(summary["total_crimes"], 0);
}

#[test]
fn build_env_requires_districts_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("config.json"), SYNTH_CONFIG.replace("\"districts_csv\": \"city/districts.csv\",", "")).unwrap();
    run_ok(tmp.path(), &["--out", "city", "--seed", "7", "synth"]);

    let out = run_in(tmp.path(), &["--config", "config.json", "build-env"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("districts_csv"));
}

#[test]
fn build_report_counts_dropped_and_skipped_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // 2x2 grid at origin, all cells usable, one district.
    fs::write(
        dir.join("grid.csv"),
        "row,col,district,habitable,walkable\n0,0,1,1,1\n0,1,1,1,1\n1,0,1,1,1\n1,1,1,1,1\n",
    )
    .unwrap();
    fs::write(dir.join("districts.csv"), "id,name,population\n1,centro,100\n").unwrap();
    // 5 locatable records, 3 out of bounds, 1 malformed year.
    fs::write(
        dir.join("crimes.csv"),
        "year,easting,northing,category,district\n\
         2015,50,50,theft,1\n\
         2015,150,50,theft,1\n\
         2016,50,150,theft,1\n\
         2016,150,150,theft,1\n\
         2016,10,10,theft,1\n\
         2015,9999,50,theft,1\n\
         2015,50,9999,theft,1\n\
         2015,-1,50,theft,1\n\
         banana,50,50,theft,1\n",
    )
    .unwrap();
    let cfg = r#"{
      "grid_rows": 2, "grid_cols": 2, "cell_side_m": 100.0,
      "origin_easting": 0.0, "origin_northing": 0.0,
      "crime_csv": "crimes.csv",
      "cell_attrs_csv": "grid.csv",
      "districts_csv": "districts.csv",
      "malformed_rows": "skip",
      "out_dir": "env"
    }"#;
    fs::write(dir.join("config.json"), cfg).unwrap();

    run_ok(dir, &["--config", "config.json", "build-env"]);
    let report: serde_json::Value = serde_json::from_str(&read(dir, "env/build_report.json")).unwrap();
    assert_eq!(report["located"], 5);
    assert_eq!(report["dropped_out_of_bounds"], 3);
    assert_eq!(report["skipped_malformed"], 1);

    // The abort policy turns the malformed row into a file+line diagnostic.
    fs::write(dir.join("config.json"), cfg.replace("skip", "abort")).unwrap();
    let out = run_in(dir, &["--config", "config.json", "build-env"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("crimes.csv:10"), "diagnostic names file and line: {stderr}");
}

#[test]
fn evaluate_perfect_prediction_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    synth_and_build(tmp.path());

    // A raster with every threshold populated: values 0..400 row-major.
    let mut matrix = String::new();
    for row in 0..20 {
        let cells: Vec<String> = (0..20).map(|col| (row * 20 + col).to_string()).collect();
        matrix.push_str(&cells.join(","));
        matrix.push('\n');
    }
    fs::write(tmp.path().join("m.csv"), &matrix).unwrap();

    run_ok(tmp.path(), &["--config", "config.json", "evaluate", "--sim", "m.csv", "--real", "m.csv"]);
    let report: serde_json::Value = serde_json::from_str(&read(tmp.path(), "env/metrics.json")).unwrap();
    for c in report["coverage"].as_array().unwrap() {
        assert_eq!(c["pei"], 1.0, "self-evaluation is optimal: {c}");
        assert_eq!(c["fai"], 1.0);
    }
    for h in report["hotspots"].as_array().unwrap() {
        assert_eq!(h["precision"], 1.0);
        assert_eq!(h["recall"], 1.0);
        assert_eq!(h["f1"], 1.0);
    }
}

#[test]
fn evaluate_reports_undefined_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    synth_and_build(tmp.path());

    let zeros = "0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n".repeat(20);
    let ones = "1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n".repeat(20);
    fs::write(tmp.path().join("zeros.csv"), &zeros).unwrap();
    fs::write(tmp.path().join("ones.csv"), &ones).unwrap();

    // No simulated crime anywhere: the flag-to-area ratio has no denominator.
    let out = run_in(
        tmp.path(),
        &["--config", "config.json", "evaluate", "--sim", "zeros.csv", "--real", "ones.csv"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAI"));

    // Shape mismatch is a metric error too.
    fs::write(tmp.path().join("small.csv"), "1,2\n3,4\n").unwrap();
    let out = run_in(
        tmp.path(),
        &["--config", "config.json", "evaluate", "--sim", "small.csv", "--real", "ones.csv"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn report_renders_block_scaled_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("counts.csv"), "0,0,0,0,0\n0,0,9,0,0\n0,0,0,0,0\n").unwrap();

    run_ok(dir, &["--out", "img", "report", "--counts", "counts.csv"]);
    let pgm = read(dir, "img/heatmap.pgm");
    let lines: Vec<&str> = pgm.lines().collect();
    assert_eq!(lines[0], "P2");
    assert_eq!(lines[1], "20 12", "dimensions are (n_cols*4, n_rows*4)");
    assert_eq!(lines[2], "255");
    // Single hot cell: exactly 16 bright pixels, everything else black.
    let bright = lines[3..].iter().flat_map(|l| l.split(' ')).filter(|&v| v == "255").count();
    assert_eq!(bright, 16);

    // All-zero raster renders black.
    fs::write(dir.join("flat.csv"), "0,0\n0,0\n").unwrap();
    run_ok(dir, &["--out", "img", "report", "--counts", "flat.csv"]);
    let pgm = read(dir, "img/heatmap.pgm");
    assert!(pgm.lines().skip(3).all(|l| l.split(' ').all(|v| v == "0")));

    // An empty raster is an input error.
    fs::write(dir.join("empty.csv"), "").unwrap();
    let out = run_in(dir, &["--out", "img", "report", "--counts", "empty.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_writes_ranked_sweep_in_id_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SYNTH_CONFIG.replace(
        "\"out_dir\": \"env\"",
        "\"mu_values\": [0.1], \"nearby_values\": [0.5], \"downtown_values\": [0.075, 0.1], \"out_dir\": \"env\"",
    );
    fs::write(tmp.path().join("config.json"), &cfg).unwrap();
    run_ok(tmp.path(), &["--out", "city", "--seed", "7", "synth"]);
    run_ok(tmp.path(), &["--config", "config.json", "build-env"]);

    let stdout = run_ok(tmp.path(), &["--config", "config.json", "--reps", "2", "calibrate"]);
    assert!(stdout.contains("selected configuration"), "{stdout}");

    let sweep = read(tmp.path(), "env/sweep.csv");
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows.len(), 3, "header + one row per configuration");
    let ids: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["1", "2"], "rows come in id order");
    let mut ranks: Vec<u32> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    ranks.sort_unstable();
    assert_eq!(ranks, [1, 2], "ranks are a permutation");

    // Averaged per-configuration rasters land next to the sweep tables.
    assert!(tmp.path().join("env/config_1_counts.csv").exists());
    assert!(tmp.path().join("env/config_2_counts.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Unknown key.
    fs::write(dir.join("bad.json"), r#"{"no_such_key": 1}"#).unwrap();
    let out = run_in(dir, &["--config", "bad.json", "synth"]);
    assert_eq!(out.status.code(), Some(2));

    // Parameter out of range.
    fs::write(dir.join("bad.json"), r#"{"find_job_probability": 1.5}"#).unwrap();
    let out = run_in(dir, &["--config", "bad.json", "synth"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown patrol strategy.
    let out = run_in(dir, &["--strategy", "zigzag", "synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zigzag"));

    // Missing config file.
    let out = run_in(dir, &["--config", "nope.json", "synth"]);
    assert_eq!(out.status.code(), Some(2));
}
