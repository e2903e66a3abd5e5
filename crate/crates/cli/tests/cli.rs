mod common;

use common::{csv_files, lqg, run_small};
use lqg_cli::manifest::{verify, Manifest, MANIFEST_FILE};
use serde_json::Value;

fn stderr_json(out: &std::process::Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

#[test]
fn list_is_stable_and_sorted() {
    let a = lqg(&["list"]);
    let b = lqg(&["list"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        ["cluster-p", "exit-time-scaling", "minkowski", "tail-curve", "tutte", "u-estimate", "uk-euclidean", "volume-scaling"]
    );
}

#[test]
fn describe_shows_keys() {
    let out = lqg(&["describe", "volume-scaling"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["field.gamma", "metric.d_gamma", "volume-scaling.s_ladder", "seed"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    let bad = lqg(&["describe", "nope"]);
    assert!(!bad.status.success());
    assert_eq!(stderr_json(&bad)["error"]["kind"], "config");
}

#[test]
fn out_of_range_gamma_names_the_key() {
    for cmd in ["validate", "run"] {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec![cmd, "volume-scaling", "--set", "field.gamma=2.5"];
        if cmd == "run" {
            args.extend(["--out-dir", dir.path().to_str().unwrap()]);
        }
        let out = lqg(&args);
        assert_eq!(out.status.code(), Some(1));
        let e = stderr_json(&out);
        assert_eq!(e["error"]["config_key"], "field.gamma", "{e}");
        assert_eq!(e["error"]["kind"], "parameter");
        assert!(e["error"]["message"].as_str().unwrap().contains("(0, 2)"));
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    for set in ["field.nope=1", "volume-scaling.n_replicas=many", "nope"] {
        let out = lqg(&["validate", "volume-scaling", "--set", set]);
        assert_eq!(out.status.code(), Some(1), "{set}");
        assert_eq!(stderr_json(&out)["error"]["kind"], "config", "{set}");
    }
    let out = lqg(&["validate"]);
    assert_eq!(stderr_json(&out)["error"]["config_key"], "experiment");
}

#[test]
fn validate_prints_canonical_config_and_hash() {
    let a = lqg(&["validate", "cluster-p", "--seed", "9"]);
    let b = lqg(&["validate", "cluster-p", "--set", "cluster-p.n_samples=10000", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "setting a default explicitly must not change the hash");
    let c = lqg(&["validate", "cluster-p", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn run_writes_a_verifiable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small("cluster-p", dir.path(), &["--seed", "42"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.experiment, "cluster-p");
    assert_eq!(m.master_seed, 42);
    assert!(!m.outputs.is_empty());
    assert!(verify(dir.path(), &m).unwrap().is_empty());
    // the manifest round-trips and its hash matches validate's
    assert_eq!(Manifest::from_json(&m.to_json().unwrap()).unwrap(), m);
    let v = lqg(&["validate", "--config", dir.path().join(MANIFEST_FILE).to_str().unwrap()]);
    assert!(String::from_utf8(v.stdout).unwrap().contains(&m.config_hash));
    // tampering is detected
    let first = dir.path().join(&m.outputs[0].path);
    std::fs::write(&first, b"x").unwrap();
    assert_eq!(verify(dir.path(), &m).unwrap(), vec![m.outputs[0].path.clone()]);
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_small("u-estimate", a.path(), &["--seed", "5"]).status.success());
    let manifest = a.path().join(MANIFEST_FILE);
    let out = lqg(&["run", "--config", manifest.to_str().unwrap(), "--out-dir", b.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_files(a.path()), csv_files(b.path()));
    assert_eq!(std::fs::read(manifest).unwrap(), std::fs::read(b.path().join(MANIFEST_FILE)).unwrap());
}

#[test]
fn seed_changes_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_small("uk-euclidean", a.path(), &["--seed", "1"]).status.success());
    assert!(run_small("uk-euclidean", b.path(), &["--seed", "2"]).status.success());
    assert_ne!(csv_files(a.path()), csv_files(b.path()));
}

#[test]
fn out_dir_env_is_a_default() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["run", "cluster-p", "--set", "cluster-p.n_samples=200"];
        args.extend_from_slice(extra);
        std::process::Command::new(env!("CARGO_BIN_EXE_lqg")).args(&args).env("LQG_OUT_DIR", env_dir.path()).output().unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.path().join(MANIFEST_FILE).exists());
    assert!(run(&["--out-dir", flag_dir.path().to_str().unwrap()]).status.success());
    assert!(flag_dir.path().join(MANIFEST_FILE).exists());
}

#[test]
fn experiment_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"tutte\"\nseed = 3\n").unwrap();
    let out = lqg(&["validate", "cluster-p", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let ok = lqg(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(String::from_utf8(ok.stdout).unwrap().contains("seed = 3"));
}
