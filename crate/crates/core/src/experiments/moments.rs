use rayon::prelude::*;

use super::{Environment, LqgSetup, MAX_TRUNCATED_FRACTION};
use crate::error::{Error, Result};
use crate::geometry::{CellMask, Point};
use crate::metric::Workspace;
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    /// `B_1(0; D_h)`
    MetricUnit,
    /// The Euclidean unit disk.
    EuclideanUnit,
}

impl BallKind {
    pub fn name(self) -> &'static str {
        match self {
            BallKind::MetricUnit => "metric_unit",
            BallKind::EuclideanUnit => "euclidean_unit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "metric_unit" => Ok(BallKind::MetricUnit),
            "euclidean_unit" => Ok(BallKind::EuclideanUnit),
            _ => Err(Error::Parameter { name: "ball_kind", message: format!("expected metric_unit or euclidean_unit, got {s:?}") }),
        }
    }
}

/// `(volume, truncated)` of the unit ball for replicas `0..n`.
pub fn ball_volumes(env: &Environment, kind: BallKind, n_replicas: usize, seed: u64) -> Result<Vec<(f64, bool)>> {
    let g = env.grid;
    let disk = CellMask::disk(g, Point::origin(), 1.0);
    if kind == BallKind::EuclideanUnit && !g.bounds().contains(Point::new(1.0, 1.0)) {
        return Err(Error::OutOfDomain("the Euclidean unit disk does not fit in the window".into()));
    }
    (0..n_replicas)
        .into_par_iter()
        .map_init(Workspace::new, |ws, i| {
            let r = env.replica(seed, i)?;
            Ok(match kind {
                BallKind::EuclideanUnit => (r.measure.region_volume(&disk)?, disk.touches_border(r.measure.margin)),
                BallKind::MetricUnit => {
                    let c = g.nearest(Point::origin())?;
                    let ball = r.graph.ball_with(ws, c, 1.0, None);
                    (r.measure.region_volume(&ball)?, ball.truncated)
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub resolution: usize,
    pub spacing: f64,
    pub top_band: i64,
    pub calibration: f64,
    pub k: u32,
    pub moment: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_used: usize,
    pub discard_rate: f64,
}

/// Empirical `E[μ(B)^k]` at each resolution with a 95% bootstrap interval.
/// Each resolution uses the finest band its grid resolves.
pub fn ball_moment_estimate(base: &LqgSetup, k: u32, kind: BallKind, resolutions: &[usize], n_replicas: usize, seed: u64) -> Result<Vec<MomentRow>> {
    if k == 0 {
        return Err(Error::Parameter { name: "k", message: "moment order must be at least 1".into() });
    }
    if resolutions.is_empty() || n_replicas == 0 {
        return Err(Error::Parameter { name: "resolutions", message: "need at least one resolution and replica".into() });
    }
    let mut out = Vec::with_capacity(resolutions.len());
    for (j, &res) in resolutions.iter().enumerate() {
        let mut s = *base;
        s.resolution = res;
        s.top_band = None;
        let seed_r = rng::derive(seed, j as u64, "resolution");
        let env = Environment::new(s, seed_r)?;
        let vols = ball_volumes(&env, kind, n_replicas, seed_r)?;
        let used: Vec<f64> = vols.iter().filter(|v| !v.1).map(|v| v.0).collect();
        let discard_rate = 1.0 - used.len() as f64 / vols.len() as f64;
        if discard_rate > MAX_TRUNCATED_FRACTION || used.is_empty() {
            return Err(Error::Truncation(format!(
                "{:.0}% of unit balls touch the window boundary at resolution {res}; enlarge the window",
                100.0 * discard_rate
            )));
        }
        let kk = k as i32;
        let stat = |xs: &[f64]| xs.iter().map(|v| v.powi(kk)).sum::<f64>() / xs.len() as f64;
        let moment = stat(&used);
        let (ci_lo, ci_hi) = stats::bootstrap_ci(&used, stat, 1000, 0.95, &mut rng::stream(seed_r, 0, "moment-bootstrap"));
        out.push(MomentRow {
            resolution: res,
            spacing: env.grid.spacing,
            top_band: env.top_band,
            calibration: env.calibration,
            k,
            moment,
            ci_lo,
            ci_hi,
            n_used: used.len(),
            discard_rate,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub threshold: f64,
    /// `P[V >= t]` with a Wilson interval.
    pub survival: f64,
    pub survival_lo: f64,
    pub survival_hi: f64,
    /// `P[V <= t]` with a Wilson interval.
    pub lower: f64,
    pub lower_lo: f64,
    pub lower_hi: f64,
    pub n_used: usize,
}

/// Empirical upper and lower tails of the unit-ball volume.
pub fn tail_curve(setup: &LqgSetup, kind: BallKind, thresholds: &[f64], n_replicas: usize, seed: u64) -> Result<Vec<TailRow>> {
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter { name: "thresholds", message: "thresholds must be sorted".into() });
    }
    if n_replicas == 0 {
        return Err(Error::Parameter { name: "n_replicas", message: "need at least one replica".into() });
    }
    let env = Environment::new(*setup, seed)?;
    let vols = ball_volumes(&env, kind, n_replicas, seed)?;
    let used: Vec<f64> = vols.iter().filter(|v| !v.1).map(|v| v.0).collect();
    let discard_rate = 1.0 - used.len() as f64 / vols.len() as f64;
    if discard_rate > MAX_TRUNCATED_FRACTION || used.is_empty() {
        return Err(Error::Truncation(format!("{:.0}% of unit balls touch the window boundary", 100.0 * discard_rate)));
    }
    let n = used.len();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let up = used.iter().filter(|&&v| v >= t).count();
            let lo = used.iter().filter(|&&v| v <= t).count();
            let (a, b) = stats::wilson_interval(up, n, 1.96);
            let (c, d) = stats::wilson_interval(lo, n, 1.96);
            TailRow {
                threshold: t,
                survival: up as f64 / n as f64,
                survival_lo: a,
                survival_hi: b,
                lower: lo as f64 / n as f64,
                lower_lo: c,
                lower_hi: d,
                n_used: n,
            }
        })
        .collect())
}
