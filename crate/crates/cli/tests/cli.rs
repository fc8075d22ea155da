use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aggar::config::{self, RunConfig};
use aggar::output::Provenance;

fn aggar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggar")).args(args).output().expect("spawn aggar")
}

fn run_ok(args: &[&str]) {
    let out = aggar(args);
    assert!(out.status.success(), "aggar {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn smoke_subcommands_write_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for cmd in ["simulate", "theory", "scaling", "disagg", "mise"] {
        run_ok(&["--preset", "smoke", "--out", out, cmd]);
    }
    let headers = [
        ("series.csv", "t,value"),
        ("autocov.csv", "lag,r_hat"),
        ("covariance.csv", "t,r"),
        ("cf.csv", "theta,log_cf_re,log_cf_im"),
        ("regime.csv", "regime,beta,alpha,exponent,limit"),
        ("partial_sums.csv", "n,replicate,S_n"),
        ("scaling_summary.csv", "regime,beta,alpha,H_theory,H_hat,stderr"),
        ("phi_hat_K0.csv", "x,phi_hat"),
        ("phi_hat_K2.csv", "x,phi_hat"),
        ("mise.csv", "q,K,mise,stderr"),
    ];
    for (file, header) in headers {
        assert_eq!(read(dir.path(), file).lines().next(), Some(header), "{file}");
    }
    let series = read(dir.path(), "series.csv");
    assert_eq!(series.lines().count(), 601);
    let phi = read(dir.path(), "phi_hat_K2.csv");
    assert_eq!(phi.lines().count(), 65);
    let sidecar: serde_json::Value = serde_json::from_str(&read(dir.path(), "phi_hat_K2.json")).unwrap();
    assert_eq!(sidecar["K"], 2);
    assert_eq!(sidecar["zeta"].as_array().unwrap().len(), 3);
    assert!(sidecar["ise"].as_f64().unwrap() >= 0.0);
    // 2 q values times 3 degrees.
    assert_eq!(read(dir.path(), "mise.csv").lines().count(), 7);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        run_ok(&["--preset", "smoke", "--out", out, "simulate"]);
        run_ok(&["--preset", "smoke", "--out", out, "scaling"]);
    }
    for f in ["series.csv", "series.json", "partial_sums.csv", "scaling.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn seed_flag_changes_the_series() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(&["--preset", "smoke", "--out", a.path().to_str().unwrap(), "simulate"]);
    run_ok(&["--preset", "smoke", "--seed", "99", "--out", b.path().to_str().unwrap(), "simulate"]);
    assert_ne!(read(a.path(), "series.csv"), read(b.path(), "series.csv"));
}

#[test]
fn provenance_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    run_ok(&["--preset", "smoke", "--seed", "5", "--out", a.path().to_str().unwrap(), "simulate"]);
    let prov: Provenance = serde_json::from_str(&read(a.path(), "series.json")).unwrap();
    assert_eq!(prov.subcommand, "simulate");
    assert_eq!(prov.seed, 5);
    let cfg = RunConfig::parse(&prov.config).unwrap();
    assert_eq!(cfg.seed, 5);
    assert_eq!(cfg, { let mut c = config::preset("smoke").unwrap(); c.seed = 5; c });

    let cfg_path = a.path().join("replay.toml");
    fs::write(&cfg_path, &prov.config).unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(&["--config", cfg_path.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "simulate"]);
    assert_eq!(read(a.path(), "series.csv"), read(b.path(), "series.csv"));
}

#[test]
fn disagg_reads_an_external_series() {
    let a = tempfile::tempdir().unwrap();
    let out = a.path().to_str().unwrap();
    run_ok(&["--preset", "smoke", "--out", out, "simulate"]);
    let cfg = format!(
        "[disagg]\ninput = \"{}\"\nq = 0.0\nk = [1]\ngrid_points = 16\n",
        a.path().join("series.csv").display()
    );
    let cfg_path = a.path().join("in.toml");
    fs::write(&cfg_path, cfg).unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(&["--config", cfg_path.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "disagg", "--normalizer-diagnostic"]);
    let sidecar: serde_json::Value = serde_json::from_str(&read(b.path(), "phi_hat_K1.json")).unwrap();
    assert!(sidecar["ise"].is_null());
    assert_eq!(sidecar["n"], 600);
    let diag = read(b.path(), "normalizer_diagnostic.csv");
    assert_eq!(diag.lines().next(), Some("j,k,gram_standard,gram_handbook"));
    let first: Vec<f64> = diag.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[2] - 1.0).abs() < 1e-10);
    assert!((first[3] - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-8);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let unknown = aggar(&["--preset", "nope", "--out", out, "simulate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown preset"));

    let bad_q = dir.path().join("bad_q.toml");
    fs::write(&bad_q, "[disagg]\nq = -1.2\n[panel]\nn_micro = 20\nn_time = 200\n").unwrap();
    assert_eq!(aggar(&["--config", bad_q.to_str().unwrap(), "--out", out, "disagg"]).status.code(), Some(2));

    let unknown_key = dir.path().join("typo.toml");
    fs::write(&unknown_key, "[panel]\nnmicro = 20\n").unwrap();
    assert_eq!(aggar(&["--config", unknown_key.to_str().unwrap(), "--out", out, "simulate"]).status.code(), Some(2));

    let budget = dir.path().join("budget.toml");
    fs::write(&budget, "budget = 1000\n[panel]\nn_micro = 100\nn_time = 1000\n").unwrap();
    assert_eq!(aggar(&["--config", budget.to_str().unwrap(), "--out", out, "simulate"]).status.code(), Some(4));

    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "t,value\n1,2\n2,2\n3,2\n4,2\n").unwrap();
    let flat_cfg = dir.path().join("flat.toml");
    fs::write(&flat_cfg, format!("[disagg]\ninput = \"{}\"\nk = [1]\n", flat.display())).unwrap();
    assert_eq!(aggar(&["--config", flat_cfg.to_str().unwrap(), "--out", out, "disagg"]).status.code(), Some(3));

    let missing = dir.path().join("missing.toml");
    assert_eq!(aggar(&["--config", missing.to_str().unwrap(), "--out", out, "simulate"]).status.code(), Some(1));
}

#[test]
fn presets_list_and_show_config() {
    let out = aggar(&["presets"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for (name, _) in config::PRESETS {
        assert!(names.lines().any(|l| l == *name));
    }
    let shown = aggar(&["--preset", "regime_ii", "show-config"]);
    let cfg = RunConfig::parse(&String::from_utf8(shown.stdout).unwrap()).unwrap();
    assert_eq!(cfg, config::preset("regime_ii").unwrap());
}
