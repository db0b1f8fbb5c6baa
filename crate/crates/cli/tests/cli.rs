use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptive-inverse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"n_ladder": [1000.0, 10000.0, 100000.0], "grid_points": 17, "hb": {"iterations": 500}}"#;

#[test]
fn simulate_then_fit_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["simulate", "--n", "1e6", "--seed", "5", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let obs: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("observation.json")).unwrap()).unwrap();
    assert_eq!(obs["N"], 100);
    assert_eq!(obs["seed"], 5);

    let obs_path = dir.path().join("observation.json");
    let o = cli(&["eb-fit", "--obs", obs_path.to_str().unwrap(), "--out", out]);
    assert!(o.status.success());
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eb_fit.json")).unwrap()).unwrap();
    let a = fit["alpha_hat"].as_f64().unwrap();
    assert!(a > 0.0 && a < 1e6f64.ln());
    assert!(dir.path().join("likelihood.csv").exists());
    assert!(dir.path().join("posterior.json").exists());
}

#[test]
fn hb_run_writes_draws_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    let o = cli(&["hb-run", "--config", &cfg, "--n", "1e4", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let draws = fs::read_to_string(dir.path().join("alpha_draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 450);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("chain_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["burn_in"], 50);
}

#[test]
fn bracket_reports_infinite_upper_as_string() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"truth": {"kind": "Explicit", "coefficients": [1.0]}}"#);
    let out = dir.path().to_str().unwrap();
    let o = cli(&["bracket", "--config", &cfg, "--n", "1e6", "--out", out]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bracket.json")).unwrap()).unwrap();
    assert_eq!(report["alpha_upper"], "inf");
    assert!(dir.path().join("h_curve.csv").exists());
}

#[test]
fn figures_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), SMALL);
        let o = cli(&[
            "figures",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for sub in ["figure1", "figure2"] {
        let ma = fs::read(a.path().join(sub).join("manifest.json")).unwrap();
        let mb = fs::read(b.path().join(sub).join("manifest.json")).unwrap();
        assert_eq!(ma, mb);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("figure1/manifest.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![11, 12, 13]);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn rate_sweep_prints_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"n_ladder": [1e4, 1e6, 1e8], "truth": {"kind": "PowerLaw", "beta": 1.0, "c": 1.0}}"#,
    );
    let o = cli(&[
        "rate-sweep",
        "--config",
        &cfg,
        "--beta",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("reference -0.4000"));
    assert!(dir.path().join("rate_sweep/rate_sweep.csv").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"n_ladder": [1e5, 1e3]}"#);
    assert_eq!(cli(&["figure1", "--config", &bad]).status.code(), Some(2));
    let malformed = write_config(dir.path(), "{not json");
    assert_eq!(cli(&["simulate", "--config", &malformed]).status.code(), Some(2));
    // Unknown subcommands are usage errors.
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        cli(&["eb-fit", "--obs", missing.to_str().unwrap()]).status.code(),
        Some(4)
    );
    let two_rungs = write_config(dir.path(), r#"{"n_ladder": [1e3, 1e4]}"#);
    assert_eq!(
        cli(&["rate-sweep", "--config", &two_rungs, "--beta", "1"])
            .status
            .code(),
        Some(2)
    );
}
