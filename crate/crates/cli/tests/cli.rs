use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_alphapot"));
    cmd.args(args).arg("--out").arg(out);
    match workers {
        Some(w) => cmd.env("ALPHAPOT_WORKERS", w),
        None => cmd.env_remove("ALPHAPOT_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

/// Data rows of a provenance-stamped CSV.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"), "missing provenance line");
    lines.skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write_config(dir: &Path, q: &str, x0: &str) -> PathBuf {
    let p = dir.join("game.toml");
    std::fs::write(
        &p,
        format!(
            "[game]\nn_players = 2\nhorizon = 1.0\ngamma = [1.0, 1.0]\nd = [0.5, -0.5]\nx0 = {x0}\n\
             drift = 0.0\nvol = 0.0\n[game.weights]\nmode = \"matrix\"\nmatrix = {q}\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn symmetric_sweep_has_zero_asymmetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["regime-sweep", "--regime", "symmetric", "--n-list", "2,4,8", "--steps", "50"], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["2", "4", "8"]);
    for r in &rows {
        assert_eq!(r[1], "symmetric");
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
        assert!(r[4].parse::<f64>().unwrap() <= 1e-10);
    }
    let fit = json(&dir.path().join("sweep_fit.json"));
    assert!(fit["result"]["bound_fit"]["unavailable"].is_string());
}

#[test]
fn exponential_sweep_decays_like_one_over_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["regime-sweep", "--regime", "exponential", "--steps", "100"], dir.path(), None);
    assert!(out.status.success());
    let header = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(header.lines().nth(1).unwrap(), "N,regime,asymmetry_index,bound,measured_gap,gap_sigma");
    let fit = json(&dir.path().join("sweep_fit.json"));
    let slope = fit["result"]["bound_fit"]["slope"].as_f64().unwrap();
    assert!((-1.15..=-0.85).contains(&slope), "bound slope {slope}");
    let measured = fit["result"]["measured_gap_fit"]["slope"].as_f64().unwrap();
    assert!((-1.3..=-0.7).contains(&measured), "measured slope {measured}");
}

#[test]
fn solve_single_player_residuals_shrink_with_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_player.toml");
    let residual = |steps: &str| {
        let o = dir.path().join(steps);
        let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--steps", steps], &o, None);
        assert!(out.status.success());
        json(&o.join("residuals.json"))["result"]["residuals"].clone()
    };
    let (a, b) = (residual("100"), residual("200"));
    for key in ["m1", "m2", "m3"] {
        let (ra, rb) = (a[key].as_f64().unwrap(), b[key].as_f64().unwrap());
        let scale = a[format!("{key}_scale")].as_f64().unwrap().max(1.0);
        assert!(ra <= 1e-3 * scale, "{key}: {ra}");
        assert!(rb <= ra / 3.0 || rb <= 1e-12 * scale, "{key}: {ra} -> {rb}");
    }
    assert!(a["m0"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn artifacts_are_reproducible_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_player.toml");
    let cfg_s = cfg.to_str().unwrap();
    let args = ["simulate", "--config", cfg_s, "--paths", "64", "--steps", "50", "--seed", "9"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&args, &a, Some("1")).status.success());
    assert!(run(&args, &b, Some("3")).status.success());
    for f in ["paths.bin", "paths.csv", "simulate.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let doc = json(&a.join("simulate.json"));
    let prov = &doc["provenance"];
    assert_eq!(prov["seed"], 9);
    assert_eq!(prov["grid"]["n_steps"], 50);
    assert!(prov["version"].as_str().unwrap().starts_with("alphapot "));
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);
    let store = alphapot::io::read_column_store(&a.join("paths.bin")).unwrap();
    assert_eq!(store.header["config_sha256"], prov["config_sha256"]);
    assert_eq!(store.column("t").unwrap().len(), 51);
    let meta = json(&a.join("run_meta.json"));
    assert!(meta["finished_unix_seconds"].as_u64().is_some());
    assert!(doc.get("finished_unix_seconds").is_none());
}

#[test]
fn every_command_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_player.toml");
    let cases = [
        ("alpha-bound", "alpha_bound.json"),
        ("solve", "residuals.json"),
        ("potential", "potential.json"),
        ("verify-ne", "ne_report.json"),
        ("check-potential", "check_potential.json"),
    ];
    for (cmd, file) in cases {
        let o = dir.path().join(cmd);
        let out = run(&[cmd, "--config", cfg.to_str().unwrap(), "--paths", "64", "--steps", "50"], &o, None);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let doc = json(&o.join(file));
        assert_eq!(doc["provenance"]["command"], cmd);
        let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(stdout["command"], cmd);
    }
    let ab = json(&dir.path().join("alpha-bound/alpha_bound.json"));
    assert!((ab["result"]["asymmetry_index"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    let trials = csv_rows(&dir.path().join("check-potential/check_potential.csv"));
    assert_eq!(trials.len(), 2 * 5 * 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[game]\nn_players = 2\n").unwrap();
    let out = run(&["solve", "--config", bad.to_str().unwrap()], &dir.path().join("o"), None);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("horizon"));

    let missing = run(&["solve", "--config", "/definitely/missing.toml"], &dir.path().join("o"), None);
    assert_eq!(missing.status.code(), Some(2));
    let no_config = run(&["solve"], &dir.path().join("o"), None);
    assert_eq!(no_config.status.code(), Some(2));
    let workers = run(&["regime-sweep", "--n-list", "2,3,4"], &dir.path().join("o"), Some("0"));
    assert_eq!(workers.status.code(), Some(2));
}

#[test]
fn blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[[0.0, 50.0], [0.0, 0.0]]", "[0.0, 0.0]");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--steps", "400"], &dir.path().join("o"), None);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "numerical");
}

#[test]
fn violated_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // A zero feedback base would make every gap vanish, hence the nonzero start.
    let cfg = write_config(dir.path(), "[[0.0, 2.0], [0.0, 0.0]]", "[1.0, -1.0]");
    let args = ["check-potential", "--config", cfg.to_str().unwrap(), "--envelope-c", "0", "--steps", "50", "--paths", "1"];
    let out = run(&args, &dir.path().join("o"), None);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("o/check_potential.json"));
    assert_eq!(report["result"]["verdict"], "violated");
}
