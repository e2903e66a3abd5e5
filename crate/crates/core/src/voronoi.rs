//! Poisson–Voronoi tessellations in the grid metric and their Tutte
//! embeddings.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CellMask, GridSpec, Point};
use crate::measure::MeasureGrid;
use crate::metric::MetricGraph;
use crate::rng;
use crate::scalar::{lit, to_f64, Real};

/// Label of cells outside the domain.
pub const NO_SITE: u32 = u32::MAX;

/// Poisson points with intensity `λ μ` on the domain: per-cell Poisson
/// counts, points uniform in their cell.
pub fn poisson_sample<T: Real>(measure: &MeasureGrid<T>, lambda: f64, domain: &CellMask<T>, seed: u64) -> Result<Vec<Point<T>>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter { name: "lambda", message: format!("lambda = {lambda} must be positive") });
    }
    domain.check_shape(&CellMask::full(measure.grid))?;
    let g = measure.grid;
    let half: T = lit(0.5);
    let mut rng = rng::stream(seed, 0, "poisson");
    let mut out = Vec::new();
    for i in domain.indices() {
        let mean = lambda * to_f64(measure.masses[i]);
        if !(mean > 0.0) {
            continue;
        }
        let n = Poisson::new(mean).map_err(|e| Error::Parameter { name: "lambda", message: e.to_string() })?.sample(&mut rng) as usize;
        let c = g.position_of(i);
        for _ in 0..n {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            out.push(Point::new(c.x + (lit::<T>(u) - half) * g.spacing, c.y + (lit::<T>(v) - half) * g.spacing));
        }
    }
    Ok(out)
}

/// A metric Voronoi tessellation restricted to a domain.
#[derive(Debug, Clone)]
pub struct Tessellation<T> {
    pub grid: GridSpec<T>,
    pub sites: Vec<Point<T>>,
    /// Grid node of each site.
    pub site_nodes: Vec<usize>,
    /// Site index per cell; [`NO_SITE`] outside the domain.
    pub labels: Vec<u32>,
    /// Sorted neighbour lists.
    pub adjacency: Vec<Vec<usize>>,
    /// Sites owning at least one cell.
    pub active: Vec<bool>,
    /// Sites meeting the domain boundary, counterclockwise, starting from
    /// the lowest index.
    pub boundary_sites: Vec<usize>,
    /// The traced boundary cells (counterclockwise cycle).
    pub boundary_cells: Vec<usize>,
}

impl<T: Real> Tessellation<T> {
    pub fn site_of(&self, p: Point<T>) -> Option<usize> {
        let i = self.grid.nearest(p).ok()?;
        (self.labels[i] != NO_SITE).then_some(self.labels[i] as usize)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (i, nb) in self.adjacency.iter().enumerate() {
            e.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        e
    }

    pub fn is_boundary(&self) -> Vec<bool> {
        let mut b = vec![false; self.sites.len()];
        for &s in &self.boundary_sites {
            b[s] = true;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LabelEntry<T> {
    d: T,
    label: u32,
    i: usize,
}

impl<T: Real> Eq for LabelEntry<T> {}

impl<T: Real> Ord for LabelEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .partial_cmp(&self.d)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.label.cmp(&self.label))
            .then_with(|| other.i.cmp(&self.i))
    }
}

impl<T: Real> PartialOrd for LabelEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const DIRS8: [(i64, i64); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

/// Moore-neighbour trace of the outer boundary of `inside`, returned
/// counterclockwise.
fn trace_boundary(grid: &GridSpec<impl Real>, inside: &[bool]) -> Vec<usize> {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let Some(start) = inside.iter().position(|&b| b) else { return Vec::new() };
    let at = |x: i64, y: i64| x >= 0 && y >= 0 && x < nx && y < ny && inside[(y * nx + x) as usize];
    let (sx, sy) = (start as i64 % nx, start as i64 / nx);
    let dir_of = |dx: i64, dy: i64| DIRS8.iter().position(|&d| d == (dx, dy)).expect("unit step");
    let mut out = vec![start];
    let (mut cx, mut cy) = (sx, sy);
    // backtrack neighbour: west of the raster-first cell is outside
    let mut b = 0usize;
    let limit = 4 * inside.len() + 8;
    for _ in 0..limit {
        let mut found = None;
        for k in 1..=8 {
            let d = (b + k) % 8;
            let (x, y) = (cx + DIRS8[d].0, cy + DIRS8[d].1);
            if at(x, y) {
                let pd = (b + k - 1) % 8;
                let (px, py) = (cx + DIRS8[pd].0, cy + DIRS8[pd].1);
                found = Some((x, y, px, py));
                break;
            }
        }
        let Some((x, y, px, py)) = found else { break };
        let nb = dir_of(px - x, py - y);
        let idx = (y * nx + x) as usize;
        // back at the start and about to repeat the first step
        if out.len() >= 2 && (cx, cy) == (sx, sy) && idx == out[1] {
            out.pop();
            break;
        }
        cx = x;
        cy = y;
        b = nb;
        out.push(idx);
    }
    // shoelace on cell centres; reverse clockwise traces
    let mut area = 0i64;
    for w in 0..out.len() {
        let (a, c) = (out[w] as i64, out[(w + 1) % out.len()] as i64);
        area += (a % nx) * (c / nx) - (c % nx) * (a / nx);
    }
    if area < 0 {
        out[1..].reverse();
    }
    out
}

/// Labels every domain cell with its nearest site in the graph metric (ties
/// to the lowest site index), then derives adjacency and the boundary cycle.
/// Sites sharing a grid node are merged into the lowest index.
pub fn voronoi_partition<T: Real>(graph: &MetricGraph<T>, sites: &[Point<T>], domain: &CellMask<T>) -> Result<Tessellation<T>> {
    let g = graph.grid;
    domain.check_shape(&CellMask::full(g))?;
    let n = g.len();
    let inside = domain.cells();
    let mut site_nodes = Vec::with_capacity(sites.len());
    let mut dist = vec![T::infinity(); n];
    let mut labels = vec![NO_SITE; n];
    let mut heap = BinaryHeap::new();
    for (s, &p) in sites.iter().enumerate() {
        let node = g.nearest(p).ok().filter(|&i| inside[i]);
        site_nodes.push(node.unwrap_or(usize::MAX));
        if let Some(i) = node {
            if labels[i] == NO_SITE {
                dist[i] = T::zero();
                labels[i] = s as u32;
                heap.push(LabelEntry { d: T::zero(), label: s as u32, i });
            }
        }
    }
    if heap.is_empty() {
        return Err(Error::Precondition("no site lies inside the domain".into()));
    }
    let mut done = vec![false; n];
    while let Some(LabelEntry { d, label, i }) = heap.pop() {
        if done[i] || d != dist[i] || label != labels[i] {
            continue;
        }
        done[i] = true;
        for (j, w) in graph.neighbors(i) {
            if !inside[j] || done[j] {
                continue;
            }
            let nd = d + w;
            if nd < dist[j] || (nd == dist[j] && label < labels[j]) {
                dist[j] = nd;
                labels[j] = label;
                heap.push(LabelEntry { d: nd, label, i: j });
            }
        }
    }
    for i in 0..n {
        if inside[i] && !done[i] {
            labels[i] = NO_SITE;
        }
    }
    let k = sites.len();
    let mut active = vec![false; k];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        let a = labels[i];
        if a == NO_SITE {
            continue;
        }
        active[a as usize] = true;
        for j in g.neighbors4(i) {
            let b = labels[j];
            if b != NO_SITE && b != a {
                adj[a as usize].push(b as usize);
            }
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    let labelled: Vec<bool> = labels.iter().map(|&l| l != NO_SITE).collect();
    let boundary_cells = trace_boundary(&g, &labelled);
    let mut seq: Vec<usize> = Vec::new();
    let mut seen = vec![false; k];
    for &c in &boundary_cells {
        let s = labels[c] as usize;
        if !seen[s] {
            seen[s] = true;
            seq.push(s);
        }
    }
    if let Some(pos) = seq.iter().enumerate().min_by_key(|(_, &s)| s).map(|(p, _)| p) {
        seq.rotate_left(pos);
    }
    Ok(Tessellation { grid: g, sites: sites.to_vec(), site_nodes, labels, adjacency: adj, active, boundary_sites: seq, boundary_cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TutteMethod {
    LinearSolve,
    WalkMc,
}

/// Result of [`tutte_embedding`].
#[derive(Debug, Clone)]
pub struct Embedding {
    /// Per-site position in the closed unit disk (`NaN` for inactive sites).
    pub positions: Vec<Point<f64>>,
    pub is_boundary: Vec<bool>,
    /// Per boundary site (in `boundary_sites` order): hitting probability.
    pub hits: Vec<f64>,
    /// Cumulative hitting probabilities `p_j`.
    pub p: Vec<f64>,
    /// Binomial standard errors of `p` (walk estimates only).
    pub p_std_error: Vec<f64>,
    pub root_site: usize,
    pub anchor_site: usize,
    pub rotation: f64,
    pub harmonic_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator. Returns the solution and final relative residual.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return (x, 0.0);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if rel <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, rel)
}

fn connected(adj: &[Vec<usize>], active: &[bool]) -> bool {
    let Some(start) = active.iter().position(|&a| a) else { return false };
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    (0..adj.len()).all(|i| !active[i] || seen[i])
}

/// Tutte embedding of the adjacency graph: boundary sites at `e^{2πi p_j}`
/// with `p_j` the probability that a simple random walk from the site
/// containing `root` first hits the boundary within `x_0..=x_j`; interior
/// sites discrete harmonic; rotated so the site containing `anchor` lies on
/// the positive real axis.
pub fn tutte_embedding<T: Real>(
    tess: &Tessellation<T>,
    method: TutteMethod,
    n_walks: usize,
    seed: u64,
    root: Point<T>,
    anchor: Point<T>,
) -> Result<Embedding> {
    let k = tess.sites.len();
    if !connected(&tess.adjacency, &tess.active) {
        return Err(Error::Topology("site adjacency graph is disconnected".into()));
    }
    let m = tess.boundary_sites.len();
    if m < 3 {
        return Err(Error::Degenerate(format!("need at least 3 boundary sites, found {m}")));
    }
    let is_boundary = tess.is_boundary();
    let root_site = tess.site_of(root).ok_or_else(|| Error::OutOfDomain("root point outside the tessellated domain".into()))?;
    let anchor_site = tess.site_of(anchor).ok_or_else(|| Error::OutOfDomain("anchor point outside the tessellated domain".into()))?;
    if is_boundary[root_site] {
        return Err(Error::Precondition("root site lies on the boundary".into()));
    }
    // interior numbering
    let interior: Vec<usize> = (0..k).filter(|&i| tess.active[i] && !is_boundary[i]).collect();
    let mut pos_of = vec![usize::MAX; k];
    for (a, &i) in interior.iter().enumerate() {
        pos_of[i] = a;
    }
    let deg: Vec<f64> = interior.iter().map(|&i| tess.adjacency[i].len() as f64).collect();
    let adj = &tess.adjacency;
    let apply = |x: &[f64], y: &mut [f64]| {
        y.par_iter_mut().enumerate().for_each(|(a, ya)| {
            let i = interior[a];
            let mut s = deg[a] * x[a];
            for &j in &adj[i] {
                if pos_of[j] != usize::MAX {
                    s -= x[pos_of[j]];
                }
            }
            *ya = s;
        });
    };
    let n_int = interior.len();
    let max_iter = 20 * n_int + 100;
    let (hits, p_se) = match method {
        TutteMethod::LinearSolve => {
            let mut e = vec![0.0; n_int];
            e[pos_of[root_site]] = 1.0;
            let (w, _) = conjugate_gradient(apply, &deg, &e, 1e-13, max_iter);
            let hits: Vec<f64> = tess
                .boundary_sites
                .iter()
                .map(|&b| adj[b].iter().filter(|&&i| pos_of[i] != usize::MAX).map(|&i| w[pos_of[i]]).sum())
                .collect();
            (hits, vec![0.0; m])
        }
        TutteMethod::WalkMc => {
            if n_walks == 0 {
                return Err(Error::Parameter { name: "n_walks", message: "need at least one walk".into() });
            }
            let mut bpos = vec![usize::MAX; k];
            for (j, &b) in tess.boundary_sites.iter().enumerate() {
                bpos[b] = j;
            }
            let ends: Vec<usize> = (0..n_walks)
                .into_par_iter()
                .map(|w| {
                    let mut rng = rng::stream(seed, w as u64, "walk");
                    let mut cur = root_site;
                    while !is_boundary[cur] {
                        let nb = &adj[cur];
                        cur = nb[rng.random_range(0..nb.len())];
                    }
                    bpos[cur]
                })
                .collect();
            let mut counts = vec![0usize; m];
            for e in ends {
                counts[e] += 1;
            }
            let hits: Vec<f64> = counts.iter().map(|&c| c as f64 / n_walks as f64).collect();
            let mut cum = 0.0;
            let se = hits
                .iter()
                .map(|h| {
                    cum += h;
                    (cum * (1.0 - cum) / n_walks as f64).max(0.0).sqrt()
                })
                .collect();
            (hits, se)
        }
    };
    let mut p = Vec::with_capacity(m);
    let mut cum = 0.0;
    for h in &hits {
        cum += h;
        p.push(cum);
    }
    // boundary values, then harmonic interior
    let mut positions = vec![Point::new(f64::NAN, f64::NAN); k];
    for (j, &b) in tess.boundary_sites.iter().enumerate() {
        let th = 2.0 * PI * p[j];
        positions[b] = Point::new(th.cos(), th.sin());
    }
    let mut rhs_x = vec![0.0; n_int];
    let mut rhs_y = vec![0.0; n_int];
    for (a, &i) in interior.iter().enumerate() {
        for &j in &adj[i] {
            if is_boundary[j] {
                rhs_x[a] += positions[j].x;
                rhs_y[a] += positions[j].y;
            }
        }
    }
    let (ux, _) = conjugate_gradient(apply, &deg, &rhs_x, 1e-13, max_iter);
    let (uy, _) = conjugate_gradient(apply, &deg, &rhs_y, 1e-13, max_iter);
    for (a, &i) in interior.iter().enumerate() {
        positions[i] = Point::new(ux[a], uy[a]);
    }
    let mut residual: f64 = 0.0;
    for &i in &interior {
        let nb = &adj[i];
        let avg = nb.iter().fold(Point::new(0.0, 0.0), |s, &j| s + positions[j]) * (1.0 / nb.len() as f64);
        residual = residual.max(positions[i].dist(avg));
    }
    let a = positions[anchor_site];
    let rotation = if a.norm() > 0.0 { -a.y.atan2(a.x) } else { 0.0 };
    let (c, s) = (rotation.cos(), rotation.sin());
    for q in positions.iter_mut() {
        *q = Point::new(c * q.x - s * q.y, s * q.x + c * q.y);
    }
    Ok(Embedding { positions, is_boundary, hits, p, p_std_error: p_se, root_site, anchor_site, rotation, harmonic_residual: residual })
}
