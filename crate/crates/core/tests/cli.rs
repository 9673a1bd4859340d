use std::path::Path;
use std::process::{Command, Output};

use hawkes_clt::cli::ExperimentConfig;
use hawkes_clt::kernel::Kernel;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkes-clt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut c = ExperimentConfig::reference();
    c.horizons = vec![10.0, 20.0, 40.0];
    c.replications = 400;
    c.debias_replicates = 8;
    c.bootstrap = 20;
    c.write_samples = true;
    let path = dir.join("config.json");
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    path
}

#[test]
fn rates_writes_every_artifact_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = bin(&["rates", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "config.json",
        "distances.csv",
        "cumulants.csv",
        "metadata.json",
        "ratefit.json",
        "sample_0.csv",
        "sample_2.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let header = std::fs::read_to_string(out.join("distances.csv")).unwrap();
    assert!(header.starts_with("horizon,replications,raw,offset,offset_rms,rule,debiased,std_error"));
    assert_eq!(header.lines().count(), 4);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);

    let r = bin(&["report", "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("slope"));
}

#[test]
fn seed_override_changes_output_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = bin(&["rates", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("distances.csv")).unwrap()
    };
    let a = run("5", "a");
    let b = run("5", "b");
    let c = run("6", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn psi_and_sim_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("psi");
    let o = bin(&["psi", "--config", cfg.to_str().unwrap(), "--horizon", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("psi.json")).unwrap()).unwrap();
    assert!((meta["l1_estimate"].as_f64().unwrap() - 1.0).abs() < 1e-3);

    let out = dir.path().join("sim");
    let o = bin(&["sim", "--config", cfg.to_str().unwrap(), "--replication", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    let path: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("path.json")).unwrap()).unwrap();
    assert_eq!(events.lines().count() as u64 - 1, path["count"].as_u64().unwrap());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::reference();
    c.kernel = Kernel::exponential(2.0, 2.0);
    let path = dir.path().join("unstable.json");
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    let o = bin(&["rates", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let bad = dir.path().join("typo.json");
    std::fs::write(&bad, r#"{"schema": 1, "kernal": {}}"#).unwrap();
    let o = bin(&["rates", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = bin(&["report", "--out", dir.path().join("empty").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn verify_suite_genuine_checks_hold_and_controls_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    let o = bin(&["verify", "--controls", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    let lemmas: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lemmas.json")).unwrap()).unwrap();
    let reports = lemmas["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 12);
    assert_eq!(lemmas["inserted_atom"]["theta"], 0.0);
    for r in reports {
        if r["variant"] == "control" {
            assert_eq!(r["verdict"], "fail", "{r}");
        } else {
            assert_ne!(r["verdict"], "fail", "{r}");
        }
    }
}
