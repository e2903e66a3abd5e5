use rayon::prelude::*;

use super::{check_ladder, check_truncation, median_fit, Environment, LqgSetup, ScalingFit};
use crate::error::{Error, Result};
use crate::geometry::{CellMask, Point};
use crate::lbm::{exit_times, ExitConfig};
use crate::metric::{Stop, Workspace};
use crate::rng;
use crate::stats;

/// A fit together with the per-sample rows behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult<R> {
    pub fit: ScalingFit,
    pub rows: Vec<R>,
    pub calibration: f64,
    pub top_band: i64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSampleRow {
    pub replica: usize,
    pub s: f64,
    pub volume: f64,
    pub truncated: bool,
}

/// `μ(B_s(0))` for every `s` in the ladder, `n_replicas` fields; fit of the
/// median log-volume against `log s`.
pub fn volume_scaling_fit(setup: &LqgSetup, s_ladder: &[f64], n_replicas: usize, seed: u64) -> Result<ScalingResult<VolumeSampleRow>> {
    check_ladder(s_ladder, "s_ladder")?;
    if n_replicas == 0 {
        return Err(Error::Parameter { name: "n_replicas", message: "need at least one replica".into() });
    }
    let env = Environment::new(*setup, seed)?;
    let s_max = *s_ladder.last().expect("checked");
    let rows: Vec<Vec<VolumeSampleRow>> = (0..n_replicas)
        .into_par_iter()
        .map_init(Workspace::new, |ws, i| {
            let r = env.replica(seed, i)?;
            let g = r.graph.grid;
            let c = g.nearest(Point::origin())?;
            r.graph.search(ws, &[c], None, Stop::Radius(s_max));
            let mut settled: Vec<(usize, f64)> = ws.settled().filter(|&(_, d)| d <= s_max).collect();
            settled.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let trunc_at = settled
                .iter()
                .filter(|(j, _)| g.border_distance(*j) <= r.graph.margin)
                .map(|&(_, d)| d)
                .fold(f64::INFINITY, f64::min);
            let mut out = Vec::with_capacity(s_ladder.len());
            let mut acc = 0.0;
            let mut k = 0;
            for &s in s_ladder {
                while k < settled.len() && settled[k].1 <= s {
                    acc += r.measure.masses[settled[k].0];
                    k += 1;
                }
                out.push(VolumeSampleRow { replica: i, s, volume: acc, truncated: s >= trunc_at });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<VolumeSampleRow> = rows.into_iter().flatten().collect();
    let samples: Vec<Vec<f64>> = s_ladder
        .iter()
        .map(|&s| rows.iter().filter(|r| r.s == s && !r.truncated && r.volume > 0.0).map(|r| r.volume).collect())
        .collect();
    let used: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    check_truncation(s_ladder, &used, n_replicas)?;
    let fit = median_fit(s_ladder, &samples, &vec![n_replicas; s_ladder.len()], false, rng::derive(seed, 0, "volume-fit"));
    Ok(ScalingResult { fit, rows, calibration: env.calibration, top_band: env.top_band, eps: env.eps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSampleRow {
    pub replica: usize,
    pub s: f64,
    pub tau: f64,
    pub euclidean_time: f64,
    pub valid: bool,
}

/// Quantum exit times of `B_s(0)` from one Brownian path per replica; fit of
/// the median `log τ` against `log s`.
pub fn exit_time_scaling_fit(
    setup: &LqgSetup,
    s_ladder: &[f64],
    n_replicas: usize,
    dt: f64,
    max_steps: usize,
    seed: u64,
) -> Result<ScalingResult<ExitSampleRow>> {
    check_ladder(s_ladder, "s_ladder")?;
    if n_replicas == 0 {
        return Err(Error::Parameter { name: "n_replicas", message: "need at least one replica".into() });
    }
    let env = Environment::new(*setup, seed)?;
    let cfg = ExitConfig { gamma: setup.gamma, eps: env.eps, dt, max_steps };
    let rows: Vec<Vec<ExitSampleRow>> = (0..n_replicas)
        .into_par_iter()
        .map(|i| {
            let r = env.replica(seed, i)?;
            let ex = exit_times(Point::origin(), s_ladder, &r.field, &r.graph, &cfg, rng::derive(seed, i as u64, "lbm-path"))?;
            Ok(ex
                .into_iter()
                .map(|e| ExitSampleRow { replica: i, s: e.s, tau: e.tau, euclidean_time: e.euclidean_time, valid: e.valid })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ExitSampleRow> = rows.into_iter().flatten().collect();
    let samples: Vec<Vec<f64>> = s_ladder
        .iter()
        .map(|&s| rows.iter().filter(|r| r.s == s && r.valid && r.tau > 0.0).map(|r| r.tau).collect())
        .collect();
    let used: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    check_truncation(s_ladder, &used, n_replicas)?;
    let fit = median_fit(s_ladder, &samples, &vec![n_replicas; s_ladder.len()], false, rng::derive(seed, 0, "exit-fit"));
    Ok(ScalingResult { fit, rows, calibration: env.calibration, top_band: env.top_band, eps: env.eps })
}

/// Exact squared Euclidean distance transform along one line (lower
/// envelope of parabolas). `f` must be finite.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    v.push(0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    let inter = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..f.len() {
        let mut k = v.len() - 1;
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            v.pop();
            z.pop();
            k -= 1;
            s = inter(q, v[k]);
        }
        v.push(q);
        z[k + 1] = s;
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        *o = (q as f64 - v[k] as f64).powi(2) + f[v[k]];
    }
}

/// Radius of the largest Euclidean disk inside the mask (distance from a
/// selected cell to the nearest unselected one, less half a cell) and the
/// mask diameter (largest centre distance plus one cell).
pub fn inscribed_radius(mask: &CellMask<f64>) -> (f64, f64) {
    let g = mask.grid;
    let idx: Vec<usize> = mask.indices().collect();
    if idx.is_empty() {
        return (0.0, 0.0);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
    for &i in &idx {
        let (x, y) = g.coords(i);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    // one ring of outside cells around the bounding box
    let (w, hgt) = (x1 - x0 + 3, y1 - y0 + 3);
    let mut f = vec![0.0; w * hgt];
    let far = ((w + hgt) * (w + hgt)) as f64;
    for &i in &idx {
        let (x, y) = g.coords(i);
        f[(y - y0 + 1) * w + (x - x0 + 1)] = far;
    }
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut tmp = vec![0.0; w.max(hgt)];
    for row in f.chunks_mut(w) {
        let src = row.to_vec();
        edt_1d(&src, &mut tmp[..w], &mut v, &mut z);
        row.copy_from_slice(&tmp[..w]);
    }
    let mut best = 0.0f64;
    let mut col = vec![0.0; hgt];
    for x in 0..w {
        for y in 0..hgt {
            col[y] = f[y * w + x];
        }
        edt_1d(&col, &mut tmp[..hgt], &mut v, &mut z);
        best = best.max(tmp[..hgt].iter().copied().fold(0.0, f64::max));
    }
    let inscribed = (best.sqrt() - 0.5) * g.spacing;
    // diameter over boundary cells of the mask
    let boundary: Vec<(f64, f64)> = idx
        .iter()
        .filter(|&&i| g.border_distance(i) == 0 || g.neighbors4(i).any(|j| !mask.get(j)))
        .map(|&i| {
            let p = g.position_of(i);
            (p.x, p.y)
        })
        .collect();
    let mut d2 = 0.0f64;
    for (a, p) in boundary.iter().enumerate() {
        for q in &boundary[a + 1..] {
            d2 = d2.max((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2));
        }
    }
    (inscribed.max(0.0), d2.sqrt() + g.spacing)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InscribedRow {
    pub replica: usize,
    pub s: f64,
    pub diameter: f64,
    pub inscribed: f64,
    /// `log inscribed / log diameter` (NaN unless `diameter < 1`).
    pub exponent: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InscribedStat {
    pub rows: Vec<InscribedRow>,
    /// Slope of `log inscribed` against `log diameter` over untruncated balls.
    pub exponent: f64,
    pub exponent_se: f64,
    pub discard_rate: f64,
}

/// Diameter and inscribed radius of `B_s(0)` for each `s` and replica.
pub fn inscribed_radius_stat(setup: &LqgSetup, s_ladder: &[f64], n_balls: usize, seed: u64) -> Result<InscribedStat> {
    if s_ladder.is_empty() || s_ladder.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Parameter { name: "s_ladder", message: "need positive radii".into() });
    }
    if n_balls == 0 {
        return Err(Error::Parameter { name: "n_balls", message: "need at least one ball".into() });
    }
    let env = Environment::new(*setup, seed)?;
    let rows: Vec<Vec<InscribedRow>> = (0..n_balls)
        .into_par_iter()
        .map_init(Workspace::new, |ws, i| {
            let r = env.replica(seed, i)?;
            let c = r.graph.grid.nearest(Point::origin())?;
            Ok(s_ladder
                .iter()
                .map(|&s| {
                    let ball = r.graph.ball_with(ws, c, s, None);
                    let (ins, diam) = inscribed_radius(&ball);
                    let exponent = if diam < 1.0 && ins > 0.0 { ins.ln() / diam.ln() } else { f64::NAN };
                    InscribedRow { replica: i, s, diameter: diam, inscribed: ins, exponent, truncated: ball.truncated }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<InscribedRow> = rows.into_iter().flatten().collect();
    let ok: Vec<&InscribedRow> = rows.iter().filter(|r| !r.truncated && r.inscribed > 0.0).collect();
    let discard_rate = 1.0 - ok.len() as f64 / rows.len() as f64;
    if discard_rate > super::MAX_TRUNCATED_FRACTION {
        return Err(Error::Truncation(format!("{:.0}% of balls touch the window boundary", 100.0 * discard_rate)));
    }
    let xs: Vec<f64> = ok.iter().map(|r| r.diameter.ln()).collect();
    let ys: Vec<f64> = ok.iter().map(|r| r.inscribed.ln()).collect();
    let fit = stats::linear_fit(&xs, &ys);
    Ok(InscribedStat { rows, exponent: fit.slope, exponent_se: fit.slope_se, discard_rate })
}

/// One step of the `d_γ` self-consistency iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DGammaIteration {
    pub input: f64,
    pub fitted: f64,
    pub ci_half_width: f64,
}

/// Iterates `d ← fitted volume slope` from `d₀ = 2 + γ²/2` until the change
/// is below 0.1 or after 5 rounds. An estimate, not ground truth.
pub fn d_gamma_self_consistency(setup: &LqgSetup, s_ladder: &[f64], n_replicas: usize, seed: u64) -> Result<Vec<DGammaIteration>> {
    let mut d = 2.0 + setup.gamma * setup.gamma / 2.0;
    let mut out = Vec::new();
    for it in 0..5 {
        let mut s = *setup;
        s.d_gamma = d;
        let fit = volume_scaling_fit(&s, s_ladder, n_replicas, rng::derive(seed, it, "d-gamma"))?.fit;
        out.push(DGammaIteration { input: d, fitted: fit.slope, ci_half_width: fit.ci_half_width });
        let done = (fit.slope - d).abs() < 0.1;
        d = fit.slope.max(2.0 + 1e-6);
        if done {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    #[test]
    fn inscribed_disk() {
        let g = GridSpec::<f64>::square(1.0, 201).unwrap();
        let m = CellMask::disk(g, Point::new(0.1, 0.0), 0.5);
        let (r, d) = inscribed_radius(&m);
        assert!((r - 0.5).abs() < 2.0 * g.spacing, "{r}");
        assert!((d - 1.0).abs() < 2.0 * g.spacing, "{d}");
        assert!(r <= d / 2.0);
        let single = CellMask::disk(g, Point::origin(), 0.001);
        let (r1, d1) = inscribed_radius(&single);
        assert!((r1 - 0.5 * g.spacing).abs() < 1e-12 && (d1 - g.spacing).abs() < 1e-12);
    }

    #[test]
    fn edt_matches_brute_force() {
        let b = 1000.0;
        let f = [0.0, b, b, b, 0.0, b, 0.0, b];
        let mut out = [0.0; 8];
        edt_1d(&f, &mut out, &mut Vec::new(), &mut Vec::new());
        assert_eq!(out, [0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn flat_volume_slope_is_two() {
        let setup = LqgSetup::flat(0.6, 241);
        let r = volume_scaling_fit(&setup, &[0.05, 0.1, 0.2, 0.5], 2, 1).unwrap();
        assert!((r.fit.slope - 2.0).abs() < 0.05, "{}", r.fit.slope);
        assert!(r.rows.iter().all(|x| !x.truncated));
    }
}
