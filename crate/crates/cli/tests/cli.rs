use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const ROW1: [&str; 8] = ["--a1", "1", "--a2", "0.25", "--p1", "2.5", "--p2", "1.5"];

fn ddeperiod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddeperiod"))
        .args(args)
        .env_remove("DDE_JOBS")
        .output()
        .expect("binary runs")
}

fn with_row1<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(ROW1);
    v.extend(rest);
    v
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn solve_row1_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "solve",
        &["--h", "0.25", "--horizon", "8", "--out-dir", out],
    ));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(&dir.path().join("summary.json"));
    let zeros = floats(&s["zeros"]);
    let want = [0.25, 2.25, 4.25, 6.25];
    assert_eq!(zeros.len(), 4);
    for (z, w) in zeros.iter().zip(want) {
        assert!((z - w).abs() < 1e-12);
    }
    assert_eq!(s["slowly_oscillating"], true);
    assert!((s["x_at_T"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x"));
    assert_eq!(lines.count(), 801);
}

#[test]
fn solve_rejects_zero_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "solve",
        &["--h", "0", "--horizon", "8", "--out-dir", out],
    ));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn solve_smoothed_reports_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "solve",
        &[
            "--h",
            "0.25",
            "--horizon",
            "8",
            "--delta",
            "0.05",
            "--step",
            "0.001",
            "--out-dir",
            out,
        ],
    ));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["solver"], "smoothed");
    let dev = s["max_deviation_from_exact"].as_f64().unwrap();
    assert!(dev > 0.0 && dev <= 0.05, "{dev}");

    // the sampled rows stay within the reported bound of the exact orbit
    let exact_dir = tempfile::tempdir().unwrap();
    let eout = exact_dir.path().to_str().unwrap();
    ddeperiod(&with_row1(
        "solve",
        &["--h", "0.25", "--horizon", "8", "--out-dir", eout],
    ));
    let read = |p: &Path| -> Vec<f64> {
        fs::read_to_string(p.join("trajectory.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (a, b) = (read(dir.path()), read(exact_dir.path()));
    assert_eq!(a.len(), b.len());
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst <= dev + 1e-12, "{worst} > {dev}");
}

#[test]
fn solve_step_too_coarse_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "solve",
        &[
            "--h",
            "0.25",
            "--horizon",
            "4",
            "--delta",
            "0.05",
            "--step",
            "0.05",
            "--out-dir",
            out,
        ],
    ));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn map_rows() {
    let o = ddeperiod(&with_row1("map", &[]));
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["h_star"].as_f64(), Some(0.25));
    assert_eq!(v["m"].as_f64(), Some(-0.5));
    assert_eq!(v["conditions"]["shape_window"], true);
    assert!(v.get("valid_h_interval").is_some());

    let o = ddeperiod(&[
        "map", "--a1", "2", "--a2", "0.25", "--p1", "2.5", "--p2", "1",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["h_star"].as_f64().unwrap() - 4.0 / 7.0).abs() < 1e-14);
}

#[test]
fn map_degenerate() {
    let o = ddeperiod(&[
        "map", "--a1", "1", "--a2", "1", "--p1", "2.5", "--p2", "1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn map_missing_param_is_usage() {
    let o = ddeperiod(&["map", "--a1", "1", "--a2", "0.25", "--p1", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ddeperiod(&[
        "map", "--a1", "-1", "--a2", "0.25", "--p1", "2.5", "--p2", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_default_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeperiod(&["verify-table", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report = json(&dir.path().join("table_report.json"));
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn verify_tampered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    fs::write(
        &rows,
        "a1,a2,p1,p2,h_star,T\n1,0.25,2.5,1.5,0.30,4\n2,0.5,2.5,2,1/3,4.5\n",
    )
    .unwrap();
    let o = ddeperiod(&[
        "verify-table",
        "--rows",
        rows.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report = json(&dir.path().join("table_report.json"));
    assert_eq!(report["rows"][0]["pass"], false);
    assert!((report["rows"][0]["h_star_delta"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert_eq!(report["rows"][1]["pass"], true);
}

#[test]
fn sweep_outputs_are_reproducible() {
    let axes = [
        "--axis",
        "a1=0.5:5:10",
        "--axis",
        "a2=0.1:2:5",
        "--axis",
        "p1=1:4:7",
    ];
    let run = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec![
            "sweep",
            "--jobs",
            jobs,
            "--out-dir",
            dir.path().to_str().unwrap(),
        ];
        args.extend(axes);
        let o = ddeperiod(&args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        (
            fs::read(dir.path().join("sweep.csv")).unwrap(),
            fs::read(dir.path().join("sweep.json")).unwrap(),
        )
    };
    let (csv1, json1) = run("1");
    let (csv4, json4) = run("4");
    assert_eq!(csv1, csv4);
    assert_eq!(json1, json4);
    let text = String::from_utf8(csv1).unwrap();
    assert_eq!(text.lines().count(), 1 + 10 * 5 * 7);
    let v: serde_json::Value = serde_json::from_slice(&json1).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 350);
}

#[test]
fn sweep_jobs_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ddeperiod"))
        .args([
            "sweep",
            "--axis",
            "p1=1:2:5",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .env("DDE_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = json(&dir.path().join("sweep.json"));
    assert!(v["cells"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["overall"] == false));
    assert!(v["cells"][0]["h_star"].is_null());

    let o = Command::new(env!("CARGO_BIN_EXE_ddeperiod"))
        .args(["sweep", "--out-dir", dir.path().to_str().unwrap()])
        .env("DDE_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_malformed_axis() {
    for bad in ["a1=0.5:5", "q=1:2:3", "a1=2:1:3", "a1=1:2:0", "p1"] {
        let o = ddeperiod(&["sweep", "--axis", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn smooth_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "smooth",
        &["--deltas", "0.1,0.05", "--out-dir", out],
    ));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&dir.path().join("convergence.json"));
    for key in ["delta", "h_delta", "slope", "orbit_distance", "fitted_K"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let h = floats(&v["h_delta"]);
    assert!((h[0] - 0.25).abs() > (h[1] - 0.25).abs());
    assert_eq!(
        o.stdout,
        fs::read(dir.path().join("convergence.json")).unwrap()
    );
}

#[test]
fn smooth_partial_and_total_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ddeperiod(&with_row1(
        "smooth",
        &["--deltas", "0.05,0.4", "--out-dir", out],
    ));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&dir.path().join("convergence.json"));
    assert!(v["errors"][1].is_string());

    let o = ddeperiod(&with_row1(
        "smooth",
        &["--deltas", "0.4,0.9", "--out-dir", out],
    ));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[params]\na1 = 2.0\na2 = 0.25\np1 = 2.5\np2 = 1.0\n\n[smoothing]\ndelta = 0.0\n",
    )
    .unwrap();
    let o = ddeperiod(&["map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["h_star"].as_f64().unwrap() - 4.0 / 7.0).abs() < 1e-14);

    let o = ddeperiod(&[
        "map",
        "--config",
        cfg.to_str().unwrap(),
        "--a1",
        "1",
        "--p2",
        "1.5",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["h_star"].as_f64(), Some(0.25));

    fs::write(&cfg, "[params]\nbogus = 1\n").unwrap();
    let o = ddeperiod(&["map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = ddeperiod(&["map", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let a = ddeperiod(&with_row1("map", &[])).stdout;
    let b = ddeperiod(&with_row1("map", &[])).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    // keys keep declaration order
    assert!(text.find("\"m\"").unwrap() < text.find("\"b\"").unwrap());
}

#[test]
fn usage_errors() {
    assert_eq!(ddeperiod(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ddeperiod(&["solve", "--h"]).status.code(), Some(2));
    assert_eq!(ddeperiod(&["--help"]).status.code(), Some(0));
}
