use rayon::prelude::*;

use super::{check_ladder, median_fit, Environment, LqgSetup, ScalingFit, MAX_TRUNCATED_FRACTION};
use crate::error::{Error, Result};
use crate::geometry::{CellMask, Rect};
use crate::metric::{MetricGraph, Stop, Workspace};
use crate::rng;
use crate::stats;

/// Greedy cover of `region` by radius-`eps` balls: scan the region in
/// raster order and centre a ball at every cell not yet covered. Returns the
/// centres and whether any ball was truncated.
pub fn greedy_cover(graph: &MetricGraph<f64>, ws: &mut Workspace<f64>, region: &CellMask<f64>, eps: f64) -> (Vec<usize>, bool) {
    let mut covered = vec![false; graph.grid.len()];
    let mut centers = Vec::new();
    let mut truncated = false;
    for i in region.indices() {
        if covered[i] {
            continue;
        }
        centers.push(i);
        let ball = graph.ball_with(ws, i, eps, None);
        truncated |= ball.truncated;
        for j in ball.indices() {
            covered[j] = true;
        }
    }
    (centers, truncated)
}

/// Greedy maximal packing of pairwise disjoint radius-`eps` balls centred in
/// `region` (raster order). Returns the centres and whether any ball was
/// truncated.
pub fn greedy_packing(graph: &MetricGraph<f64>, ws: &mut Workspace<f64>, region: &CellMask<f64>, eps: f64) -> (Vec<usize>, bool) {
    // distance to the union of accepted balls, exact up to eps
    let mut to_union = vec![f64::INFINITY; graph.grid.len()];
    let mut centers = Vec::new();
    let mut truncated = false;
    for i in region.indices() {
        if to_union[i] <= eps {
            continue;
        }
        centers.push(i);
        let ball = graph.ball_with(ws, i, eps, None);
        truncated |= ball.truncated;
        let cells: Vec<usize> = ball.indices().collect();
        graph.search(ws, &cells, None, Stop::Radius(eps));
        for (j, d) in ws.settled() {
            if d < to_union[j] {
                to_union[j] = d;
            }
        }
    }
    (centers, truncated)
}

/// Whether the given centres cover `region` at radius `r`.
fn covers(graph: &MetricGraph<f64>, ws: &mut Workspace<f64>, centers: &[usize], region: &CellMask<f64>, r: f64) -> bool {
    graph.search(ws, centers, None, Stop::Radius(r));
    region.indices().all(|i| ws.dist(i) <= r)
}

/// Outcome of the packing/cover comparison at one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingCheck {
    /// Greedy packing count `M_eps`.
    pub packing: usize,
    /// Greedy cover count at `2 eps`.
    pub cover_2eps: usize,
    /// The packing centres cover the region at radius `2 eps`.
    pub packing_covers_2eps: bool,
    /// Best available `N_{2eps}`: the smaller of the two verified covers.
    pub n_2eps: usize,
}

impl PackingCheck {
    pub fn holds(&self) -> bool {
        self.packing >= self.n_2eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiRow {
    pub replica: usize,
    pub eps: f64,
    pub cover: usize,
    pub check: PackingCheck,
    /// Some eps-ball of the cover reached the window boundary.
    pub truncated: bool,
    /// Some ball of the packing or the `2 eps` cover reached the boundary.
    pub check_truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiResult {
    /// Slope of `log N_eps` against `log 1/eps`.
    pub fit: ScalingFit,
    pub rows: Vec<MinkowskiRow>,
    pub calibration: f64,
    pub top_band: i64,
    pub eps: f64,
}

fn median_weight(graph: &MetricGraph<f64>) -> f64 {
    let step = (graph.grid.len() / 4096).max(1);
    let w: Vec<f64> = (0..graph.grid.len()).step_by(step).flat_map(|i| graph.neighbors(i).map(|(_, w)| w).collect::<Vec<_>>()).collect();
    stats::median(&w)
}

/// Cover and packing counts of `region` at every `eps`, per replica.
pub fn minkowski_estimate(setup: &LqgSetup, region: Rect<f64>, eps_ladder: &[f64], n_replicas: usize, seed: u64) -> Result<MinkowskiResult> {
    check_ladder(eps_ladder, "eps_ladder")?;
    if n_replicas == 0 {
        return Err(Error::Parameter { name: "n_replicas", message: "need at least one replica".into() });
    }
    let env = Environment::new(*setup, seed)?;
    let mask = CellMask::rect(env.grid, region);
    if mask.count() == 0 {
        return Err(Error::Parameter { name: "region", message: "region contains no grid cells".into() });
    }
    let rows: Vec<Vec<MinkowskiRow>> = (0..n_replicas)
        .into_par_iter()
        .map_init(Workspace::new, |ws, i| {
            let r = env.replica(seed, i)?;
            let w = median_weight(&r.graph);
            if eps_ladder[0] < 2.0 * w {
                return Err(Error::Resolution(format!("eps = {} is below two typical edge lengths ({w})", eps_ladder[0])));
            }
            Ok(eps_ladder
                .iter()
                .map(|&eps| {
                    let (cover, t1) = greedy_cover(&r.graph, ws, &mask, eps);
                    let (cover2, t2) = greedy_cover(&r.graph, ws, &mask, 2.0 * eps);
                    let (pack, t3) = greedy_packing(&r.graph, ws, &mask, eps);
                    let ok = covers(&r.graph, ws, &pack, &mask, 2.0 * eps);
                    let n_2eps = if ok { cover2.len().min(pack.len()) } else { cover2.len() };
                    let check = PackingCheck { packing: pack.len(), cover_2eps: cover2.len(), packing_covers_2eps: ok, n_2eps };
                    MinkowskiRow { replica: i, eps, cover: cover.len(), check, truncated: t1, check_truncated: t2 || t3 }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MinkowskiRow> = rows.into_iter().flatten().collect();
    let samples: Vec<Vec<f64>> = eps_ladder
        .iter()
        .map(|&e| rows.iter().filter(|r| r.eps == e && !r.truncated).map(|r| r.cover as f64).collect())
        .collect();
    for (e, s) in eps_ladder.iter().zip(&samples) {
        let rate = 1.0 - s.len() as f64 / n_replicas as f64;
        if rate > MAX_TRUNCATED_FRACTION || s.is_empty() {
            return Err(Error::Truncation(format!(
                "{:.0}% of covers at eps = {e} reach the window boundary; shrink the region or enlarge the window",
                100.0 * rate
            )));
        }
    }
    let fit = median_fit(eps_ladder, &samples, &vec![n_replicas; eps_ladder.len()], true, rng::derive(seed, 0, "minkowski-fit"));
    Ok(MinkowskiResult { fit, rows, calibration: env.calibration, top_band: env.top_band, eps: env.eps })
}
