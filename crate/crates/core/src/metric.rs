//! Shortest-path approximation of the LQG metric on the 8-connected grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{check_gamma, Error, Result};
use crate::field::{FieldGrid, StarPlan};
use crate::geometry::{CellMask, GridSpec, MaskKind, MaskQuery, Point};
use crate::rng;
use crate::scalar::{lit, to_f64, Real};
use crate::stats;

/// `sqrt(8/3)`, the pure-gravity coupling.
pub const GAMMA_PURE_GRAVITY: f64 = 1.632_993_161_855_452;

/// Built-in `d_γ` table (only the pure-gravity value is known exactly).
pub fn known_d_gamma(gamma: f64) -> Option<f64> {
    ((gamma - GAMMA_PURE_GRAVITY).abs() < 1e-9).then_some(4.0)
}

/// `ξ = γ/d_γ` and `Q = γ/2 + 2/γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConstants {
    pub gamma: f64,
    pub d_gamma: f64,
    pub xi: f64,
    pub q: f64,
}

impl MetricConstants {
    pub fn new(gamma: f64, d_gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(d_gamma > 2.0) || !d_gamma.is_finite() {
            return Err(Error::Parameter { name: "d_gamma", message: format!("d_gamma = {d_gamma} must exceed 2") });
        }
        Ok(MetricConstants { gamma, d_gamma, xi: gamma / d_gamma, q: gamma / 2.0 + 2.0 / gamma })
    }

    /// The γ = 0 Euclidean model: unit weights, `Q = ∞`.
    pub fn flat() -> Self {
        MetricConstants { gamma: 0.0, d_gamma: 2.0, xi: 0.0, q: f64::INFINITY }
    }

    pub fn is_flat(&self) -> bool {
        self.gamma == 0.0
    }
}

/// Cell-to-cell shortest-path metric with weights
/// `spacing * length * e^{ξ field(midpoint)} / calibration`.
#[derive(Debug, Clone)]
pub struct MetricGraph<T> {
    pub grid: GridSpec<T>,
    pub constants: MetricConstants,
    pub calibration: T,
    /// Balls reaching within this many steps of the edge are truncated.
    pub margin: usize,
    east: Vec<T>,
    north: Vec<T>,
    ne: Vec<T>,
    nw: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry<T> {
    d: T,
    i: usize,
}

impl<T: Real> Eq for Entry<T> {}

impl<T: Real> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.partial_cmp(&self.d).unwrap_or(Ordering::Equal).then_with(|| other.i.cmp(&self.i))
    }
}

impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable Dijkstra state; resetting costs only the nodes touched.
#[derive(Debug, Default)]
pub struct Workspace<T> {
    dist: Vec<T>,
    done: Vec<bool>,
    touched: Vec<usize>,
    heap: BinaryHeap<Entry<T>>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Workspace { dist: Vec::new(), done: Vec::new(), touched: Vec::new(), heap: BinaryHeap::new() }
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            self.dist = vec![T::infinity(); n];
            self.done = vec![false; n];
            self.touched.clear();
        } else {
            for &i in &self.touched {
                self.dist[i] = T::infinity();
                self.done[i] = false;
            }
            self.touched.clear();
        }
        self.heap.clear();
    }

    /// Distance of a settled node (infinite otherwise).
    pub fn dist(&self, i: usize) -> T {
        if self.done.get(i).copied().unwrap_or(false) {
            self.dist[i]
        } else {
            T::infinity()
        }
    }

    /// Nodes settled by the last search, in settling order.
    pub fn settled(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.touched.iter().filter(|&&i| self.done[i]).map(|&i| (i, self.dist[i]))
    }
}

/// When a search stops.
pub enum Stop<'a, T> {
    Exhaust,
    /// Stop once the frontier passes this distance.
    Radius(T),
    /// Stop at the first settled node satisfying the predicate.
    Target(&'a (dyn Fn(usize) -> bool + Sync)),
}

impl<T: Real> MetricGraph<T> {
    /// Builds the graph from precomputed constants (no parameter checks).
    pub fn with_constants(field: &FieldGrid<T>, constants: MetricConstants, calibration: T) -> Self {
        let g = field.grid;
        let (nx, ny) = (g.nx, g.ny);
        let h = g.spacing;
        let xi: T = lit(constants.xi);
        let f = &field.values;
        let inf = T::infinity();
        let axis = h / calibration;
        let diag = h * lit(std::f64::consts::SQRT_2) / calibration;
        let half: T = lit(0.5);
        let quarter: T = lit(0.25);
        let mut east = vec![inf; g.len()];
        let mut north = vec![inf; g.len()];
        let mut ne = vec![inf; g.len()];
        let mut nw = vec![inf; g.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                if ix + 1 < nx {
                    east[i] = axis * (xi * (f[i] + f[i + 1]) * half).exp();
                }
                if iy + 1 < ny {
                    north[i] = axis * (xi * (f[i] + f[i + nx]) * half).exp();
                    if ix + 1 < nx {
                        let m = (f[i] + f[i + 1] + f[i + nx] + f[i + nx + 1]) * quarter;
                        ne[i] = diag * (xi * m).exp();
                    }
                    if ix >= 1 {
                        let m = (f[i - 1] + f[i] + f[i + nx - 1] + f[i + nx]) * quarter;
                        nw[i] = diag * (xi * m).exp();
                    }
                }
            }
        }
        MetricGraph { grid: g, constants, calibration, margin: 0, east, north, ne, nw }
    }

    /// Zero field, unit calibration: the octile metric.
    pub fn flat(grid: GridSpec<T>) -> Self {
        MetricGraph::with_constants(&FieldGrid::zeros(grid), MetricConstants::flat(), T::one())
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    /// Weighted neighbours of node `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let nx = self.grid.nx;
        let (ix, iy) = (i % nx, i / nx);
        let ny = self.grid.ny;
        let left = ix > 0;
        let right = ix + 1 < nx;
        let down = iy > 0;
        let up = iy + 1 < ny;
        let cand = [
            (right, i + 1, if right { self.east[i] } else { T::zero() }),
            (left, i.wrapping_sub(1), if left { self.east[i - 1] } else { T::zero() }),
            (up, i + nx, if up { self.north[i] } else { T::zero() }),
            (down, i.wrapping_sub(nx), if down { self.north[i - nx] } else { T::zero() }),
            (up && right, i + nx + 1, if up && right { self.ne[i] } else { T::zero() }),
            (down && left, i.wrapping_sub(nx + 1), if down && left { self.ne[i - nx - 1] } else { T::zero() }),
            (up && left, (i + nx).wrapping_sub(1), if up && left { self.nw[i] } else { T::zero() }),
            (down && right, (i + 1).wrapping_sub(nx), if down && right { self.nw[i + 1 - nx] } else { T::zero() }),
        ];
        cand.into_iter().filter(|c| c.0).map(|(_, j, w)| (j, w))
    }

    /// Multi-source Dijkstra. Returns the target node when stopped by
    /// [`Stop::Target`].
    pub fn search(
        &self,
        ws: &mut Workspace<T>,
        sources: &[usize],
        region: Option<&[bool]>,
        stop: Stop<'_, T>,
    ) -> Option<(usize, T)> {
        ws.reset(self.grid.len());
        for &s in sources {
            if region.is_some_and(|r| !r[s]) {
                continue;
            }
            if ws.dist[s] > T::zero() {
                ws.dist[s] = T::zero();
                ws.touched.push(s);
                ws.heap.push(Entry { d: T::zero(), i: s });
            }
        }
        while let Some(Entry { d, i }) = ws.heap.pop() {
            if ws.done[i] || d > ws.dist[i] {
                continue;
            }
            match &stop {
                Stop::Radius(s) if d > *s => return None,
                _ => {}
            }
            ws.done[i] = true;
            if let Stop::Target(pred) = &stop {
                if pred(i) {
                    return Some((i, d));
                }
            }
            for (j, w) in self.neighbors(i) {
                if ws.done[j] || region.is_some_and(|r| !r[j]) {
                    continue;
                }
                let nd = d + w;
                if nd < ws.dist[j] {
                    if ws.dist[j] == T::infinity() {
                        ws.touched.push(j);
                    }
                    ws.dist[j] = nd;
                    ws.heap.push(Entry { d: nd, i: j });
                }
            }
        }
        None
    }

    fn check_region(&self, src: usize, region: Option<&CellMask<T>>) -> Result<()> {
        if let Some(r) = region {
            if r.grid.nx != self.grid.nx || r.grid.ny != self.grid.ny {
                return Err(Error::Shape { expected: self.grid.len(), found: r.grid.len() });
            }
            if !r.get(src) {
                return Err(Error::Precondition("source lies outside the region".into()));
            }
        }
        Ok(())
    }

    /// Shortest-path distance between the nodes nearest to `src` and `dst`,
    /// optionally restricted to `region`. Infinite if unreachable.
    pub fn distance(&self, src: Point<T>, dst: Point<T>, region: Option<&CellMask<T>>) -> Result<T> {
        let s = self.grid.nearest(src)?;
        let t = self.grid.nearest(dst)?;
        self.check_region(s, region)?;
        let mut ws = Workspace::new();
        let pred = move |i: usize| i == t;
        Ok(self
            .search(&mut ws, &[s], region.map(|r| r.cells()), Stop::Target(&pred))
            .map_or(T::infinity(), |(_, d)| d))
    }

    /// Distance from `src` to the nearest cell of `set`.
    pub fn distance_to_set(&self, src: Point<T>, set: &CellMask<T>, region: Option<&CellMask<T>>) -> Result<T> {
        set.check_shape(&CellMask::full(self.grid))?;
        let s = self.grid.nearest(src)?;
        self.check_region(s, region)?;
        let mut ws = Workspace::new();
        let cells = set.cells();
        let pred = |i: usize| cells[i];
        Ok(self
            .search(&mut ws, &[s], region.map(|r| r.cells()), Stop::Target(&pred))
            .map_or(T::infinity(), |(_, d)| d))
    }

    /// Distances from one node to every node (infinite where unreachable).
    pub fn distances_from(&self, src: usize, region: Option<&CellMask<T>>) -> Vec<T> {
        let mut ws = Workspace::new();
        self.search(&mut ws, &[src], region.map(|r| r.cells()), Stop::Exhaust);
        ws.dist.iter().zip(&ws.done).map(|(&d, &ok)| if ok { d } else { T::infinity() }).collect()
    }

    /// Cells at distance at most `s` from `center`.
    pub fn metric_ball(&self, center: Point<T>, s: T, region: Option<&CellMask<T>>) -> Result<CellMask<T>> {
        let c = self.grid.nearest(center)?;
        self.check_region(c, region)?;
        let mut ws = Workspace::new();
        Ok(self.ball_with(&mut ws, c, s, region.map(|r| r.cells())))
    }

    /// [`MetricGraph::metric_ball`] about a node, reusing a workspace.
    pub fn ball_with(&self, ws: &mut Workspace<T>, center: usize, s: T, region: Option<&[bool]>) -> CellMask<T> {
        if s < T::zero() {
            return CellMask::empty(self.grid, self.ball_query(center, s));
        }
        self.search(ws, &[center], region, Stop::Radius(s));
        let mut mask = CellMask::empty(self.grid, self.ball_query(center, s));
        let mut truncated = false;
        for (i, d) in ws.settled() {
            if d <= s {
                mask.set(i, true);
                truncated |= self.grid.border_distance(i) <= self.margin;
            }
        }
        mask.truncated = truncated;
        mask
    }

    fn ball_query(&self, center: usize, s: T) -> MaskQuery<T> {
        MaskQuery { center: self.grid.position_of(center), radius: s, kind: MaskKind::MetricBall }
    }

    fn check_disk_inside(&self, z: Point<T>, r: T) -> Result<()> {
        let b = self.grid.bounds();
        if z.x - r < b.min.x || z.x + r > b.max.x || z.y - r < b.min.y || z.y + r > b.max.y {
            return Err(Error::OutOfDomain(format!("disk of radius {r} about ({}, {}) exits the window", z.x, z.y)));
        }
        Ok(())
    }

    /// Node indices with `|p - z| <= r` (bounding-box scan).
    fn nodes_within(&self, z: Point<T>, r: T) -> Vec<usize> {
        let g = &self.grid;
        let lo = |c: T, o: T| ((c - r - o) / g.spacing).floor().to_i64().unwrap_or(0).max(0) as usize;
        let hi = |c: T, o: T, n: usize| (((c + r - o) / g.spacing).ceil().to_i64().unwrap_or(0).max(0) as usize).min(n - 1);
        let (x0, x1) = (lo(z.x, g.origin.x), hi(z.x, g.origin.x, g.nx));
        let (y0, y1) = (lo(z.y, g.origin.y), hi(z.y, g.origin.y, g.ny));
        let mut out = Vec::new();
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if g.position(ix, iy).dist(z) <= r {
                    out.push(g.index(ix, iy));
                }
            }
        }
        out
    }

    /// `D(∂B_{r/2}(z), ∂B_r(z))` restricted to the annulus: paths start
    /// anywhere in the inner disk, stay in `B_r(z)` and end at nodes with
    /// `|p - z| >= r - spacing`.
    pub fn annulus_crossing(&self, z: Point<T>, r: T) -> Result<T> {
        self.check_disk_inside(z, r)?;
        let h = self.grid.spacing;
        let half: T = lit(0.5);
        let sources = self.nodes_within(z, r * half);
        if sources.is_empty() {
            return Err(Error::Resolution(format!("annulus radius {r} below grid resolution")));
        }
        let mut region = vec![false; self.grid.len()];
        for i in self.nodes_within(z, r) {
            region[i] = true;
        }
        let g = self.grid;
        let pred = move |i: usize| g.position_of(i).dist(z) >= r - h;
        let mut ws = Workspace::new();
        Ok(self.search(&mut ws, &sources, Some(&region), Stop::Target(&pred)).map_or(T::infinity(), |(_, d)| d))
    }

    /// Whether `D(p, {|q - p| >= rho - spacing}) <= d` for node `p`.
    fn local_distance_within(&self, ws: &mut Workspace<T>, p: usize, rho: T, d: T) -> bool {
        let g = self.grid;
        let c = g.position_of(p);
        let h = g.spacing;
        let pred = move |i: usize| g.position_of(i).dist(c) >= rho - h;
        matches!(self.search(ws, &[p], None, Stop::Target(&pred)), Some((_, dist)) if dist <= d)
    }

    /// The proxy set `{z : D(z, ∂B_{r/4}(z)) <= d}` over all nodes whose
    /// `r/4`-disk lies inside the window (other nodes are excluded).
    pub fn proxy_set(&self, r: T, d: T) -> Result<CellMask<T>> {
        let rho = r * lit(0.25);
        let g = self.grid;
        let b = g.bounds();
        let testable: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let p = g.position_of(i);
                p.x - rho >= b.min.x && p.x + rho <= b.max.x && p.y - rho >= b.min.y && p.y + rho <= b.max.y
            })
            .collect();
        if testable.is_empty() {
            return Err(Error::OutOfDomain(format!("window too small for proxy radius r/4 = {rho}")));
        }
        let hits: Vec<usize> = testable
            .par_iter()
            .map_init(Workspace::new, |ws, &i| self.local_distance_within(ws, i, rho, d).then_some(i))
            .flatten()
            .collect();
        let mut mask = CellMask::empty(g, MaskQuery { center: Point::origin(), radius: r, kind: MaskKind::Proxy });
        for i in hits {
            mask.set(i, true);
        }
        Ok(mask)
    }
}

/// Builds the metric graph after checking `γ`, `d_γ` and any singularities
/// (`α < Q` required).
pub fn build_metric_graph<T: Real>(field: &FieldGrid<T>, gamma: f64, d_gamma: f64, calibration: T) -> Result<MetricGraph<T>> {
    let c = MetricConstants::new(gamma, d_gamma)?;
    for s in &field.singularities {
        if to_f64(s.alpha) >= c.q {
            return Err(Error::Parameter {
                name: "alpha",
                message: format!("singularity strength {} must be below Q = {}", s.alpha, c.q),
            });
        }
    }
    if !(calibration > T::zero()) {
        return Err(Error::Parameter { name: "calibration", message: "calibration must be positive".into() });
    }
    Ok(MetricGraph::with_constants(field, c, calibration))
}

/// Median of `D(0, (1,0))` over fresh replicas from `plan`, using unit
/// calibration. Dividing weights by it makes the median distance 1.
pub fn calibrate<T: Real>(plan: &StarPlan<T>, constants: MetricConstants, n_samples: usize, seed: u64) -> Result<T> {
    if n_samples == 0 {
        return Err(Error::Parameter { name: "n_cal_samples", message: "need at least one calibration sample".into() });
    }
    let g = plan.grid;
    let a = Point::origin();
    let b = Point::new(T::one(), T::zero());
    if !g.contains(a) || !g.contains(b) {
        return Err(Error::OutOfDomain("calibration needs 0 and 1 inside the window".into()));
    }
    let ds: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let f = plan.sample(rng::derive(seed, i as u64, "calibration"));
            let graph = MetricGraph::with_constants(&f, constants, T::one());
            graph.distance(a, b, None).map(to_f64)
        })
        .collect::<Result<_>>()?;
    Ok(lit(stats::median(&ds)))
}

/// Octile distance between lattice offsets: the flat 8-connected metric.
pub fn octile(dx: f64, dy: f64) -> f64 {
    let (a, b) = (dx.abs().max(dy.abs()), dx.abs().min(dy.abs()));
    a - b + std::f64::consts::SQRT_2 * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_star_field;
    use crate::geometry::Rect;

    #[test]
    fn constants() {
        let c = MetricConstants::new(GAMMA_PURE_GRAVITY, 4.0).unwrap();
        assert!((c.xi - 0.40825).abs() < 1e-5);
        assert!((c.q - 2.04124).abs() < 1e-5);
        assert_eq!(c.xi * c.d_gamma, c.gamma);
        assert_eq!(MetricConstants::new(1.0, 2.0).unwrap_err().parameter(), Some("d_gamma"));
        assert_eq!(MetricConstants::new(2.5, 4.0).unwrap_err().parameter(), Some("gamma"));
        assert_eq!(known_d_gamma(GAMMA_PURE_GRAVITY), Some(4.0));
    }

    #[test]
    fn flat_distances_are_octile() {
        let g = GridSpec::<f64>::square(1.0, 41).unwrap();
        let m = MetricGraph::flat(g);
        let h = g.spacing;
        let a = g.position(3, 5);
        let b = g.position(4, 5);
        assert!((m.distance(a, b, None).unwrap() - h).abs() < 1e-15);
        let c = g.position(30, 12);
        let d = m.distance(a, c, None).unwrap();
        assert!((d - h * octile(27.0, 7.0)).abs() < 1e-12);
        assert_eq!(m.distance(a, a, None).unwrap(), 0.0);
        let full = CellMask::full(g);
        assert_eq!(m.distance(a, c, Some(&full)).unwrap(), d);
    }

    #[test]
    fn region_source_must_be_inside() {
        let g = GridSpec::<f64>::square(1.0, 21).unwrap();
        let m = MetricGraph::flat(g);
        let r = CellMask::disk(g, Point::new(0.5, 0.5), 0.2);
        assert!(matches!(m.distance(Point::origin(), Point::new(0.5, 0.5), Some(&r)), Err(Error::Precondition(_))));
    }

    #[test]
    fn weyl_scaling() {
        let f = sample_star_field::<f64>(0, 2, Rect::centered(0.5), 0.01, 11).unwrap();
        let gamma = GAMMA_PURE_GRAVITY;
        let g0 = build_metric_graph(&f, gamma, 4.0, 1.0).unwrap();
        let g1 = build_metric_graph(&f.shifted(2f64.ln()), gamma, 4.0, 1.0).unwrap();
        let a = Point::new(-0.3, -0.2);
        let b = Point::new(0.35, 0.3);
        let r = g1.distance(a, b, None).unwrap() / g0.distance(a, b, None).unwrap();
        assert!((r - 2f64.powf(gamma / 4.0)).abs() < 1e-12 * r);
        assert!((r - 1.3273).abs() < 5e-4);
    }

    #[test]
    fn singularity_strength_checked() {
        let g = GridSpec::<f64>::square(1.0, 41).unwrap();
        let f = crate::field::add_log_singularity(&FieldGrid::zeros(g), Point::origin(), 2.1, 0.1).unwrap();
        assert_eq!(build_metric_graph(&f, GAMMA_PURE_GRAVITY, 4.0, 1.0).unwrap_err().parameter(), Some("alpha"));
    }

    #[test]
    fn balls() {
        let g = GridSpec::<f64>::square(1.0, 81).unwrap();
        let m = MetricGraph::flat(g);
        let zero = m.metric_ball(Point::origin(), 0.0, None).unwrap();
        assert_eq!(zero.count(), 1);
        let small = m.metric_ball(Point::origin(), 0.2, None).unwrap();
        let big = m.metric_ball(Point::origin(), 0.3, None).unwrap();
        assert!(small.is_subset_of(&big));
        assert!(!big.truncated);
        assert!(m.metric_ball(Point::origin(), 1.2, None).unwrap().truncated);
    }

    #[test]
    fn flat_annulus_crossing() {
        let g = GridSpec::<f64>::square(0.5, 201).unwrap();
        let m = MetricGraph::flat(g);
        let d = m.annulus_crossing(Point::origin(), 0.4).unwrap();
        assert!((d - 0.2).abs() <= g.spacing + 1e-12, "{d}");
        assert!(matches!(m.annulus_crossing(Point::new(0.3, 0.0), 0.4), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn flat_proxy_set() {
        let g = GridSpec::<f64>::square(0.5, 51).unwrap();
        let m = MetricGraph::flat(g);
        let r = 0.4;
        let full = m.proxy_set(r, r / 4.0).unwrap();
        let rho = r / 4.0;
        let interior = (0..g.len()).filter(|&i| {
            let p = g.position_of(i);
            p.x.abs() + rho <= 0.5 && p.y.abs() + rho <= 0.5
        });
        assert!(interior.clone().all(|i| full.get(i)));
        let empty = m.proxy_set(r, r / 4.0 * (1.0 - 2.0 * g.spacing / rho) - 1e-9).unwrap();
        assert_eq!(empty.count(), 0);
    }
}
