//! The built-in experiments: config schema, validation and execution.

use std::collections::BTreeMap;

use lqg_core::cluster::{estimate_p_many, estimate_u_many, ClusterConstants, DeltaVariant, PointSet, UEstimatorConfig};
use lqg_core::experiments::{
    check_ladder, euclidean_uk_mc, exit_time_scaling_fit, minkowski_estimate, tail_curve, tutte_experiment, volume_scaling_fit, BallKind,
    ScalingFit,
};
use lqg_core::field::StarPlan;
use lqg_core::io::fmt_f64;
use lqg_core::metric::GAMMA_PURE_GRAVITY;
use lqg_core::{Calibration, LqgSetup, MetricConstants, Normalization, Point, Rect};
use serde_json::{json, Value as Json};
use toml::Value;

use crate::config::Config;
use crate::error::{CliError, Result};

/// One configurable key with its default.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub section: &'static str,
    pub key: &'static str,
    pub default: Value,
    pub doc: &'static str,
}

/// A result table bound for `<out-dir>/<file>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Tables plus quantities derived while running (calibration, band range,
/// spacing and similar), recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub tables: Vec<CsvTable>,
    pub derived: BTreeMap<String, Json>,
}

#[derive(Debug)]
pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: fn() -> Vec<Param>,
    pub validate: fn(&Config) -> Result<()>,
    pub run: fn(&Config) -> Result<Outcome>,
}

/// Sorted by name.
pub static EXPERIMENTS: [Experiment; 8] = [
    Experiment {
        name: "cluster-p",
        summary: "Monte Carlo P^{a,x}_K for a fixed point set over a list of x",
        params: cluster_p_params,
        validate: cluster_p_validate,
        run: cluster_p_run,
    },
    Experiment {
        name: "exit-time-scaling",
        summary: "median quantum exit time of metric balls B_s(0) against s; log-log slope",
        params: exit_params,
        validate: exit_validate,
        run: exit_run,
    },
    Experiment {
        name: "minkowski",
        summary: "greedy metric-ball cover and packing counts of a square region; slope of log N_eps against log 1/eps",
        params: minkowski_params,
        validate: minkowski_validate,
        run: minkowski_run,
    },
    Experiment {
        name: "tail-curve",
        summary: "empirical upper and lower tails of the unit-ball volume",
        params: tail_params,
        validate: tail_validate,
        run: tail_run,
    },
    Experiment {
        name: "tutte",
        summary: "Poisson-Voronoi tessellation of the unit disk and its Tutte embedding",
        params: tutte_params,
        validate: tutte_validate,
        run: tutte_run,
    },
    Experiment {
        name: "u-estimate",
        summary: "importance-sampled u^n_k(x) over a list of x",
        params: u_params,
        validate: u_validate,
        run: u_run,
    },
    Experiment {
        name: "uk-euclidean",
        summary: "importance-sampled Euclidean u_k(r) with divergence diagnostics",
        params: uk_params,
        validate: uk_validate,
        run: uk_run,
    },
    Experiment {
        name: "volume-scaling",
        summary: "median measure of metric balls B_s(0) against s; log-log slope",
        params: volume_params,
        validate: volume_validate,
        run: volume_run,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

fn p(section: &'static str, key: &'static str, default: impl Into<Value>, doc: &'static str) -> Param {
    Param { section, key, default: default.into(), doc }
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

fn b(x: bool) -> String {
    x.to_string()
}

// ---- shared field / measure / metric settings ----

struct LqgDefaults {
    gamma: f64,
    half_width: f64,
    resolution: i64,
    d_gamma: f64,
}

fn lqg_params(d: LqgDefaults) -> Vec<Param> {
    vec![
        p("field", "gamma", d.gamma, "coupling constant in (0, 2); 0 selects the flat model"),
        p("field", "half_width", d.half_width, "the window is [-half_width, half_width]^2"),
        p("field", "resolution", d.resolution, "grid nodes per side"),
        p("field", "top_band", 0i64, "finest band; 0 picks the finest band the grid resolves"),
        p("measure", "eps_cells", 4i64, "circle-average radius in grid spacings (power of two)"),
        p("measure", "normalization", "gmc", "gmc or lqg"),
        p("metric", "d_gamma", d.d_gamma, "dimension used in xi = gamma / d_gamma"),
        p("metric", "calibration", 1.0, "fixed metric constant, used when calibration_samples = 0"),
        p("metric", "calibration_samples", 0i64, "if positive, calibrate to the median D(0, 1) over this many fields"),
    ]
}

fn lqg_setup(c: &Config) -> Result<LqgSetup> {
    let top = c.i64("field", "top_band");
    let samples = c.usize("metric", "calibration_samples")?;
    Ok(LqgSetup {
        gamma: c.f64("field", "gamma"),
        d_gamma: c.f64("metric", "d_gamma"),
        half_width: c.f64("field", "half_width"),
        resolution: c.usize("field", "resolution")?,
        top_band: if top == 0 { None } else { Some(top) },
        eps_cells: c.usize("measure", "eps_cells")?,
        normalization: Normalization::parse(c.str("measure", "normalization"))?,
        calibration: if samples > 0 { Calibration::Median(samples) } else { Calibration::Fixed(c.f64("metric", "calibration")) },
    })
}

/// Cheap checks that do not synthesize any field.
fn lqg_validate(c: &Config) -> Result<LqgSetup> {
    let s = lqg_setup(c)?;
    let grid = s.grid()?;
    if s.eps_cells < 2 || !s.eps_cells.is_power_of_two() {
        return Err(lqg_core::Error::Parameter { name: "eps_cells", message: "must be a power of two >= 2".into() }.into());
    }
    if !s.is_flat() {
        MetricConstants::new(s.gamma, s.d_gamma)?;
        let max = StarPlan::<f64>::max_band(grid.spacing);
        if let Some(t) = s.top_band {
            if t < 1 || t > max {
                return Err(lqg_core::Error::Parameter { name: "top_band", message: format!("must lie in 1..={max} at this spacing") }.into());
            }
        }
        if let Calibration::Fixed(k) = s.calibration {
            if !(k > 0.0) {
                return Err(lqg_core::Error::Parameter { name: "calibration", message: "must be positive".into() }.into());
            }
        }
    }
    Ok(s)
}

fn setup_derived(s: &LqgSetup, calibration: f64, top_band: i64, eps: f64) -> BTreeMap<String, Json> {
    let spacing = 2.0 * s.half_width / (s.resolution - 1) as f64;
    let mut d = BTreeMap::new();
    d.insert("spacing".into(), json!(spacing));
    d.insert("eps".into(), json!(eps));
    d.insert("band_range".into(), json!([0, top_band]));
    d.insert("calibration_constant".into(), json!(calibration));
    d.insert("field_normalization".into(), json!("star-scale field summed over bands 1..=top; no unit-circle shift"));
    d
}

fn fit_tables(fit: &ScalingFit, stat: &'static str, extra: &[(&str, f64)]) -> Vec<CsvTable> {
    let per_scale = CsvTable {
        file: "fit.csv".into(),
        header: vec!["scale", stat, "n_used", "discard_rate"],
        rows: (0..fit.scales.len())
            .map(|j| vec![fmt_f64(fit.scales[j]), fmt_f64(fit.statistics[j]), fit.n_used[j].to_string(), fmt_f64(fit.discard_rate[j])])
            .collect(),
    };
    let mut rows = vec![
        vec!["slope".to_string(), fmt_f64(fit.slope)],
        vec!["intercept".to_string(), fmt_f64(fit.intercept)],
        vec!["ci_half_width".to_string(), fmt_f64(fit.ci_half_width)],
    ];
    rows.extend(extra.iter().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]));
    vec![per_scale, CsvTable { file: "summary.csv".into(), header: vec!["quantity", "value"], rows }]
}

// ---- volume-scaling ----

const HEADLINE: LqgDefaults = LqgDefaults { gamma: GAMMA_PURE_GRAVITY, half_width: 0.25, resolution: 1024, d_gamma: 4.0 };
const S_LADDER: [f64; 4] = [0.006, 0.012, 0.024, 0.06];

fn volume_params() -> Vec<Param> {
    let mut v = lqg_params(HEADLINE);
    v.push(p("volume-scaling", "s_ladder", floats(&S_LADDER), "metric radii, increasing, spanning a decade"));
    v.push(p("volume-scaling", "n_replicas", 50i64, "independent fields"));
    v
}

fn volume_validate(c: &Config) -> Result<()> {
    lqg_validate(c)?;
    check_ladder(&c.f64_list("volume-scaling", "s_ladder"), "s_ladder")?;
    Ok(())
}

fn volume_run(c: &Config) -> Result<Outcome> {
    let s = lqg_validate(c)?;
    let r = volume_scaling_fit(&s, &c.f64_list("volume-scaling", "s_ladder"), c.usize("volume-scaling", "n_replicas")?, c.seed)?;
    let mut tables = vec![CsvTable {
        file: "samples.csv".into(),
        header: vec!["replica", "s", "volume", "truncated"],
        rows: r.rows.iter().map(|x| vec![x.replica.to_string(), fmt_f64(x.s), fmt_f64(x.volume), b(x.truncated)]).collect(),
    }];
    tables.extend(fit_tables(&r.fit, "median_volume", &[]));
    Ok(Outcome { tables, derived: setup_derived(&s, r.calibration, r.top_band, r.eps) })
}

// ---- exit-time-scaling ----

fn exit_params() -> Vec<Param> {
    let mut v = lqg_params(HEADLINE);
    v.push(p("exit-time-scaling", "s_ladder", floats(&S_LADDER), "metric radii, increasing, spanning a decade"));
    v.push(p("exit-time-scaling", "n_replicas", 50i64, "independent fields, one Brownian path each"));
    v.push(p("exit-time-scaling", "dt", 2.5e-7, "Euler time step of the planar Brownian motion"));
    v.push(p("exit-time-scaling", "max_steps", 50_000_000i64, "path length cap; capped paths are discarded"));
    v
}

fn exit_validate(c: &Config) -> Result<()> {
    lqg_validate(c)?;
    check_ladder(&c.f64_list("exit-time-scaling", "s_ladder"), "s_ladder")?;
    if !(c.f64("exit-time-scaling", "dt") > 0.0) {
        return Err(lqg_core::Error::Parameter { name: "dt", message: "time step must be positive".into() }.into());
    }
    Ok(())
}

fn exit_run(c: &Config) -> Result<Outcome> {
    exit_validate(c)?;
    let s = lqg_setup(c)?;
    let sec = "exit-time-scaling";
    let r = exit_time_scaling_fit(&s, &c.f64_list(sec, "s_ladder"), c.usize(sec, "n_replicas")?, c.f64(sec, "dt"), c.usize(sec, "max_steps")?, c.seed)?;
    let mut tables = vec![CsvTable {
        file: "samples.csv".into(),
        header: vec!["replica", "s", "tau", "euclidean_time", "valid"],
        rows: r
            .rows
            .iter()
            .map(|x| vec![x.replica.to_string(), fmt_f64(x.s), fmt_f64(x.tau), fmt_f64(x.euclidean_time), b(x.valid)])
            .collect(),
    }];
    tables.extend(fit_tables(&r.fit, "median_tau", &[]));
    Ok(Outcome { tables, derived: setup_derived(&s, r.calibration, r.top_band, r.eps) })
}

// ---- minkowski ----

fn minkowski_params() -> Vec<Param> {
    let mut v = lqg_params(HEADLINE);
    v.push(p("minkowski", "region_half_width", 0.075, "the covered region is [-h, h]^2"));
    v.push(p("minkowski", "eps_ladder", floats(&[0.004, 0.008, 0.016, 0.04]), "ball radii, increasing, spanning a decade"));
    v.push(p("minkowski", "n_replicas", 50i64, "independent fields"));
    v
}

fn minkowski_validate(c: &Config) -> Result<()> {
    lqg_validate(c)?;
    check_ladder(&c.f64_list("minkowski", "eps_ladder"), "eps_ladder")?;
    if !(c.f64("minkowski", "region_half_width") > 0.0) {
        return Err(lqg_core::Error::Parameter { name: "region_half_width", message: "must be positive".into() }.into());
    }
    Ok(())
}

fn minkowski_run(c: &Config) -> Result<Outcome> {
    minkowski_validate(c)?;
    let s = lqg_setup(c)?;
    let region = Rect::centered(c.f64("minkowski", "region_half_width"));
    let r = minkowski_estimate(&s, region, &c.f64_list("minkowski", "eps_ladder"), c.usize("minkowski", "n_replicas")?, c.seed)?;
    let rows = CsvTable {
        file: "counts.csv".into(),
        header: vec![
            "replica",
            "eps",
            "cover",
            "packing",
            "cover_2eps",
            "packing_covers_2eps",
            "n_2eps",
            "packing_bound_holds",
            "truncated",
            "check_truncated",
        ],
        rows: r
            .rows
            .iter()
            .map(|x| {
                vec![
                    x.replica.to_string(),
                    fmt_f64(x.eps),
                    x.cover.to_string(),
                    x.check.packing.to_string(),
                    x.check.cover_2eps.to_string(),
                    b(x.check.packing_covers_2eps),
                    x.check.n_2eps.to_string(),
                    b(x.check.holds()),
                    b(x.truncated),
                    b(x.check_truncated),
                ]
            })
            .collect(),
    };
    let mut tables = vec![rows];
    tables.extend(fit_tables(&r.fit, "median_cover", &[]));
    Ok(Outcome { tables, derived: setup_derived(&s, r.calibration, r.top_band, r.eps) })
}

// ---- tail-curve ----

fn tail_params() -> Vec<Param> {
    let mut v = lqg_params(LqgDefaults { gamma: 1.0, half_width: 1.25, resolution: 256, d_gamma: 2.908_248_290_463_863 });
    v.push(p("tail-curve", "ball_kind", "euclidean_unit", "euclidean_unit or metric_unit"));
    v.push(p(
        "tail-curve",
        "thresholds",
        floats(&[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0]),
        "volume thresholds, sorted",
    ));
    v.push(p("tail-curve", "n_replicas", 200i64, "independent fields"));
    v
}

fn tail_validate(c: &Config) -> Result<()> {
    lqg_validate(c)?;
    BallKind::parse(c.str("tail-curve", "ball_kind"))?;
    let t = c.f64_list("tail-curve", "thresholds");
    if t.windows(2).any(|w| w[1] < w[0]) {
        return Err(lqg_core::Error::Parameter { name: "thresholds", message: "thresholds must be sorted".into() }.into());
    }
    Ok(())
}

fn tail_run(c: &Config) -> Result<Outcome> {
    tail_validate(c)?;
    let s = lqg_setup(c)?;
    let kind = BallKind::parse(c.str("tail-curve", "ball_kind"))?;
    let rows = tail_curve(&s, kind, &c.f64_list("tail-curve", "thresholds"), c.usize("tail-curve", "n_replicas")?, c.seed)?;
    let table = CsvTable {
        file: "tail.csv".into(),
        header: vec!["threshold", "survival", "survival_lo", "survival_hi", "lower", "lower_lo", "lower_hi", "n_used"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.threshold),
                    fmt_f64(r.survival),
                    fmt_f64(r.survival_lo),
                    fmt_f64(r.survival_hi),
                    fmt_f64(r.lower),
                    fmt_f64(r.lower_lo),
                    fmt_f64(r.lower_hi),
                    r.n_used.to_string(),
                ]
            })
            .collect(),
    };
    Ok(Outcome { tables: vec![table], derived: BTreeMap::new() })
}

// ---- tutte ----

fn tutte_params() -> Vec<Param> {
    let mut v = lqg_params(LqgDefaults { gamma: GAMMA_PURE_GRAVITY, half_width: 1.05, resolution: 256, d_gamma: 4.0 });
    v.push(p("tutte", "lambdas", floats(&[25.0, 50.0, 100.0, 200.0]), "Poisson intensities relative to the measure"));
    v.push(p("tutte", "n_replicas", 4i64, "independent fields per intensity"));
    v.push(p("tutte", "n_walks", 1000i64, "random walks per site for the Monte Carlo embedding; 0 skips it"));
    v
}

fn tutte_validate(c: &Config) -> Result<()> {
    lqg_validate(c)?;
    let l = c.f64_list("tutte", "lambdas");
    if l.is_empty() || l.iter().any(|x| !(*x > 0.0)) {
        return Err(lqg_core::Error::Parameter { name: "lambdas", message: "intensities must be positive".into() }.into());
    }
    Ok(())
}

fn tutte_run(c: &Config) -> Result<Outcome> {
    tutte_validate(c)?;
    let s = lqg_setup(c)?;
    let rows = tutte_experiment(&s, &c.f64_list("tutte", "lambdas"), c.usize("tutte", "n_replicas")?, c.usize("tutte", "n_walks")?, c.seed)?;
    let table = CsvTable {
        file: "embedding.csv".into(),
        header: vec!["lambda", "replica", "n_sites", "n_boundary", "harmonic_residual", "rms_displacement", "walk_max_z", "walk_within_3se"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.lambda),
                    r.replica.to_string(),
                    r.n_sites.to_string(),
                    r.n_boundary.to_string(),
                    fmt_f64(r.harmonic_residual),
                    fmt_f64(r.rms_displacement),
                    fmt_f64(r.walk_max_z),
                    fmt_f64(r.walk_within_3se),
                ]
            })
            .collect(),
    };
    Ok(Outcome { tables: vec![table], derived: BTreeMap::new() })
}

// ---- cluster-p ----

fn cluster_p_params() -> Vec<Param> {
    let pts = Value::Array(vec![floats(&[0.0, 0.0]), floats(&[0.2, 0.0]), floats(&[0.0, 0.05])]);
    vec![
        p("field", "gamma", 1.0, "coupling constant in (0, 2)"),
        p("cluster-p", "points", pts, "the point set K as [x, y] pairs"),
        p("cluster-p", "a", 0i64, "root scale index"),
        p("cluster-p", "xs", floats(&[0.0, 1.0, 2.0, 4.0]), "offsets x"),
        p("cluster-p", "delta", 0.0, "slack added to Q in the vertex condition"),
        p("cluster-p", "n_samples", 10_000i64, "field samples"),
    ]
}

fn cluster_p_inputs(c: &Config) -> Result<(PointSet<f64>, ClusterConstants)> {
    let pts = c.points("cluster-p", "points")?;
    let set = PointSet::new(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect())?;
    let k = ClusterConstants::new(c.f64("field", "gamma"), 4.0, c.f64("cluster-p", "delta"))?;
    Ok((set, k))
}

fn cluster_p_validate(c: &Config) -> Result<()> {
    cluster_p_inputs(c)?;
    if c.usize("cluster-p", "n_samples")? < 100 {
        return Err(lqg_core::Error::Parameter { name: "n_samples", message: "need at least 100 samples".into() }.into());
    }
    Ok(())
}

fn cluster_p_run(c: &Config) -> Result<Outcome> {
    let (set, k) = cluster_p_inputs(c)?;
    let xs = c.f64_list("cluster-p", "xs");
    let est = estimate_p_many(&set, c.i64("cluster-p", "a"), &xs, &k, c.usize("cluster-p", "n_samples")?, c.seed)?;
    let table = CsvTable {
        file: "p.csv".into(),
        header: vec!["x", "estimate", "std_error", "n_samples"],
        rows: xs.iter().zip(&est).map(|(x, e)| vec![fmt_f64(*x), fmt_f64(e.estimate), fmt_f64(e.std_error), e.n_samples.to_string()]).collect(),
    };
    let mut derived = BTreeMap::new();
    derived.insert("q".into(), json!(k.q));
    Ok(Outcome { tables: vec![table], derived })
}

// ---- u-estimate ----

fn u_params() -> Vec<Param> {
    vec![
        p("field", "gamma", 1.5, "coupling constant in (0, 2)"),
        p("u-estimate", "n", 1i64, "configurations live in the disk of radius n"),
        p("u-estimate", "k", 2i64, "number of points"),
        p("u-estimate", "xs", floats(&[0.0, 2.0, 4.0]), "offsets x"),
        p("u-estimate", "delta", 0.0, "slack"),
        p("u-estimate", "delta_variant", "condition", "condition (Q + delta) or exponent (gamma^2 + delta)"),
        p("u-estimate", "n_outer", 20_000i64, "importance samples of the configuration"),
        p("u-estimate", "n_inner", 200i64, "field samples per configuration"),
    ]
}

fn u_config(c: &Config) -> Result<UEstimatorConfig> {
    let variant = match c.str("u-estimate", "delta_variant") {
        "condition" => DeltaVariant::Condition,
        "exponent" => DeltaVariant::Exponent,
        other => {
            return Err(lqg_core::Error::Parameter { name: "delta_variant", message: format!("expected condition or exponent, got {other:?}") }.into())
        }
    };
    let n = c.i64("u-estimate", "n");
    Ok(UEstimatorConfig {
        n: u32::try_from(n).map_err(|_| CliError::Config { key: "u-estimate.n".into(), message: "must be a small nonnegative integer".into() })?,
        k: c.usize("u-estimate", "k")?,
        gamma: c.f64("field", "gamma"),
        delta: c.f64("u-estimate", "delta"),
        variant,
        n_outer: c.usize("u-estimate", "n_outer")?,
        n_inner: c.usize("u-estimate", "n_inner")?,
    })
}

fn u_validate(c: &Config) -> Result<()> {
    let u = u_config(c)?;
    ClusterConstants::new(u.gamma, 4.0, 0.0)?;
    if u.k == 0 || u.k > 10 {
        return Err(lqg_core::Error::Parameter { name: "k", message: "k must lie in 1..=10".into() }.into());
    }
    Ok(())
}

fn u_run(c: &Config) -> Result<Outcome> {
    u_validate(c)?;
    let u = u_config(c)?;
    let xs = c.f64_list("u-estimate", "xs");
    let est = estimate_u_many(&u, &xs, c.seed)?;
    let k = ClusterConstants::new(u.gamma, 4.0, 0.0)?;
    let table = CsvTable {
        file: "u.csv".into(),
        header: vec!["x", "estimate", "std_error", "n_samples"],
        rows: xs.iter().zip(&est).map(|(x, e)| vec![fmt_f64(*x), fmt_f64(e.estimate), fmt_f64(e.std_error), e.n_samples.to_string()]).collect(),
    };
    let prop = u.proposal();
    let mut derived = BTreeMap::new();
    derived.insert("c_k".into(), json!(k.c_k(u.k)));
    derived.insert("proposal".into(), json!({"radius": prop.radius, "rho_max": prop.rho_max, "beta": prop.beta}));
    Ok(Outcome { tables: vec![table], derived })
}

// ---- uk-euclidean ----

fn uk_params() -> Vec<Param> {
    vec![
        p("field", "gamma", 1.0, "coupling constant in [0, 2)"),
        p("uk-euclidean", "k", 2i64, "number of points"),
        p("uk-euclidean", "radii", floats(&[0.5, 1.0]), "disk radii r"),
        p("uk-euclidean", "n_samples", 100_000i64, "importance samples per radius"),
    ]
}

fn uk_validate(c: &Config) -> Result<()> {
    let g = c.f64("field", "gamma");
    if !(0.0..2.0).contains(&g) {
        return Err(lqg_core::Error::Parameter { name: "gamma", message: format!("gamma = {g} must lie in [0, 2)") }.into());
    }
    let k = c.usize("uk-euclidean", "k")?;
    if k == 0 || k > 10 {
        return Err(lqg_core::Error::Parameter { name: "k", message: "k must lie in 1..=10".into() }.into());
    }
    if c.f64_list("uk-euclidean", "radii").iter().any(|r| !(*r > 0.0)) {
        return Err(lqg_core::Error::Parameter { name: "radii", message: "radii must be positive".into() }.into());
    }
    Ok(())
}

fn uk_run(c: &Config) -> Result<Outcome> {
    uk_validate(c)?;
    let g = c.f64("field", "gamma");
    let k = c.usize("uk-euclidean", "k")?;
    let n = c.usize("uk-euclidean", "n_samples")?;
    let radii = c.f64_list("uk-euclidean", "radii");
    let mut rows = Vec::new();
    for (j, &r) in radii.iter().enumerate() {
        let e = euclidean_uk_mc(k, g, r, n, lqg_core::rng::derive(c.seed, j as u64, "radius"))?;
        rows.push(vec![
            fmt_f64(r),
            fmt_f64(e.estimate),
            fmt_f64(e.std_error),
            e.n_samples.to_string(),
            b(e.analytic_divergence),
            b(e.cauchy_failed),
        ]);
    }
    let table = CsvTable {
        file: "uk.csv".into(),
        header: vec!["r", "estimate", "std_error", "n_samples", "analytic_divergence", "cauchy_failed"],
        rows,
    };
    let mut derived = BTreeMap::new();
    derived.insert("scaling_exponent".into(), json!(2.0 * k as f64 - g * g * (k * (k - 1)) as f64 / 2.0));
    Ok(Outcome { tables: vec![table], derived })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_complete() {
        let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for n in ["volume-scaling", "exit-time-scaling", "cluster-p", "u-estimate", "minkowski", "tutte", "uk-euclidean", "tail-curve"] {
            assert!(find(n).is_some(), "{n}");
        }
        assert_eq!(EXPERIMENTS.len(), 8);
    }

    #[test]
    fn schema_keys_are_unique() {
        for e in &EXPERIMENTS {
            let ps = (e.params)();
            for (i, a) in ps.iter().enumerate() {
                assert!(ps[..i].iter().all(|b| (b.section, b.key) != (a.section, a.key)), "{} {}.{}", e.name, a.section, a.key);
            }
        }
    }
}
