#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn lqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqg")).args(args).env_remove("LQG_OUT_DIR").output().expect("run lqg")
}

/// Quick settings for every experiment.
pub fn small(experiment: &str) -> Vec<&'static str> {
    match experiment {
        "volume-scaling" => vec![
            "field.resolution=128",
            "volume-scaling.s_ladder=[0.005, 0.01, 0.02, 0.05]",
            "volume-scaling.n_replicas=4",
        ],
        "exit-time-scaling" => vec![
            "field.resolution=128",
            "exit-time-scaling.s_ladder=[0.005, 0.01, 0.02, 0.05]",
            "exit-time-scaling.n_replicas=4",
            "exit-time-scaling.dt=1e-5",
            "exit-time-scaling.max_steps=1000000",
        ],
        "minkowski" => vec![
            "field.half_width=0.5",
            "field.resolution=512",
            "minkowski.eps_ladder=[0.006, 0.012, 0.024, 0.06]",
            "minkowski.n_replicas=2",
        ],
        "tail-curve" => vec!["field.resolution=64", "tail-curve.n_replicas=10"],
        "tutte" => vec!["field.resolution=64", "tutte.lambdas=[10, 20]", "tutte.n_replicas=1", "tutte.n_walks=200"],
        "cluster-p" => vec!["cluster-p.n_samples=500"],
        "u-estimate" => vec!["u-estimate.n_outer=500", "u-estimate.n_inner=20"],
        "uk-euclidean" => vec!["uk-euclidean.n_samples=2000"],
        other => panic!("no small config for {other}"),
    }
}

/// `lqg run <experiment>` with the small settings and extra flags.
pub fn run_small(experiment: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", experiment, "--out-dir", out.to_str().unwrap()];
    for s in small(experiment) {
        args.push("--set");
        args.push(s);
    }
    args.extend_from_slice(extra);
    lqg(&args)
}

pub fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}
