//! End-to-end checks of the command-line interface: exit codes, file
//! formats, and the reproducibility contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cbs-antiloc"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cbs_antiloc_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const ORACLE_ATOM_SPECTRUM: &str = r#"{
    "scheme": {"preset": "classical_dipole"},
    "cloud": {"shape": "sphere", "sigma": 700.0, "target_b": 1.0},
    "channel": {"final_m": 0},
    "delta_grid": {"start": -3.0, "stop": 3.0, "steps": 3},
    "n_samples": 10,
    "n_max_order": 2,
    "seed": 42,
    "outputs": {"csv_path": "oracle.csv", "plot_path": "oracle.svg"}
}"#;

#[test]
fn spectrum_smoke_three_rows() {
    let dir = temp_dir("smoke");
    let cfg = write_config(&dir, "run.json", ORACLE_ATOM_SPECTRUM);
    let out = binary()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("oracle.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[0].contains("seed=42"));
    assert_eq!(
        lines[1],
        "delta_gamma,sigma_single,sigma_ladder,sigma_interf,X_EF,R2,stderr_X_EF,stderr_R2,resampled_paths"
    );
    assert_eq!(lines.len(), 5); // comment + header + 3 rows
    assert!(dir.join("oracle.svg").exists());
}

#[test]
fn same_seed_byte_identical_csv() {
    let dir = temp_dir("determinism");
    let cfg = write_config(&dir, "run.json", ORACLE_ATOM_SPECTRUM);
    let run = |csv: &str, threads: &str| {
        let out = binary()
            .args(["spectrum", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .args(["--threads", threads])
            .env("CBS_ANTILOC_THREADS", "")
            .output()
            .unwrap();
        assert!(out.status.success());
        let bytes = std::fs::read(dir.join("oracle.csv")).unwrap();
        std::fs::rename(dir.join("oracle.csv"), dir.join(csv)).unwrap();
        bytes
    };
    let first = run("a.csv", "1");
    let second = run("b.csv", "4");
    assert_eq!(first, second, "CSV differs across reruns/worker counts");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = temp_dir("seedflag");
    let cfg = write_config(&dir, "run.json", ORACLE_ATOM_SPECTRUM);
    let out = binary()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .args(["--seed", "777"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("oracle.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("seed=777"));
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = temp_dir("badjson");
    let cfg = write_config(&dir, "bad.json", "{\n  \"delta_grid\": {,}\n}");
    let out = binary()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 2") && err.contains("column"),
        "diagnostic lacks line/column: {err}"
    );
}

#[test]
fn missing_seed_exits_2() {
    let dir = temp_dir("noseed");
    let cfg = write_config(
        &dir,
        "noseed.json",
        r#"{
            "delta_grid": {"start": -1.0, "stop": 1.0, "steps": 2},
            "n_samples": 1,
            "outputs": {"csv_path": "x.csv"}
        }"#,
    );
    let out = binary()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_grid_exits_2() {
    let dir = temp_dir("badgrid");
    let cfg = write_config(
        &dir,
        "grid.json",
        r#"{
            "delta_grid": {"start": 5.0, "stop": -5.0, "steps": 10},
            "n_samples": 1,
            "seed": 1,
            "outputs": {"csv_path": "x.csv"}
        }"#,
    );
    let out = binary()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn beatspec_frozen_atoms_single_spike() {
    let dir = temp_dir("beat");
    let cfg = write_config(
        &dir,
        "beat.json",
        r#"{
            "delta_grid": {"start": -1.0, "stop": 1.0, "steps": 2},
            "n_samples": 1,
            "seed": 5,
            "outputs": {"csv_path": "beat.csv"},
            "beat": {"v_rms": 0.0, "grid": {"start": -0.1, "stop": 0.1, "steps": 201}}
        }"#,
    );
    let out = binary()
        .args(["beatspec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("beat.csv")).unwrap();
    let mut i1_nonzero = 0;
    let mut i2_nonzero = 0;
    for line in csv.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[1].parse::<f64>().unwrap() > 0.0 {
            i1_nonzero += 1;
        }
        if cols[2].parse::<f64>().unwrap() > 0.0 {
            i2_nonzero += 1;
        }
    }
    assert_eq!(i1_nonzero, 1, "I1 should be a single-bin spike");
    assert_eq!(i2_nonzero, 1, "I2 should be a single-bin spike");
}

#[test]
fn beatspec_default_width_matches_velocity() {
    let dir = temp_dir("beatwidth");
    let cfg = write_config(
        &dir,
        "beat.json",
        r#"{
            "delta_grid": {"start": -1.0, "stop": 1.0, "steps": 2},
            "n_samples": 1,
            "seed": 5,
            "outputs": {"csv_path": "beat.csv"},
            "beat": {"v_rms": 0.02, "grid": {"start": -0.4, "stop": 0.4, "steps": 801}}
        }"#,
    );
    let out = binary()
        .args(["beatspec", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("beat.csv")).unwrap();
    let mut grid = Vec::new();
    let mut i1 = Vec::new();
    for line in csv.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        grid.push(cols[0].parse::<f64>().unwrap());
        i1.push(cols[1].parse::<f64>().unwrap());
    }
    let area: f64 = grid
        .windows(2)
        .zip(i1.windows(2))
        .map(|(w, v)| 0.5 * (v[0] + v[1]) * (w[1] - w[0]))
        .sum();
    let second: f64 = grid
        .windows(2)
        .zip(i1.windows(2))
        .map(|(w, v)| 0.5 * (v[0] * w[0] * w[0] + v[1] * w[1] * w[1]) * (w[1] - w[0]))
        .sum();
    let width = (second / area).sqrt();
    assert!(
        (width - 0.04).abs() < 0.001,
        "I1 rms width {width} should be 2·v_rms = 0.04"
    );
}

#[test]
fn oracles_subcommand_passes() {
    let out = binary().arg("oracles").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "stdout: {stdout} stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout.matches("[PASS]").count(), 4);
    assert_eq!(stdout.matches("[FAIL]").count(), 0);
}

#[test]
fn config_subcommand_requires_config_flag() {
    let out = binary().arg("spectrum").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
