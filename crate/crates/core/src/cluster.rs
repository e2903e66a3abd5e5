//! Separation splitting, labelled cluster trees and the Monte Carlo
//! estimators built on them.

use std::collections::HashMap;
use std::f64::consts::{E, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_gamma, Error, Result};
use crate::field::{BandField, KernelSpec};
use crate::geometry::Point;
use crate::rng::{self, Rng};
use crate::scalar::{to_f64, Real};
use crate::stats;

/// A finite set of distinct planar points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T> {
    points: Vec<Point<T>>,
}

impl<T: Real> PointSet<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter { name: "k", message: "point set must be nonempty".into() });
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::Degenerate(format!("duplicate point ({}, {})", points[i].x, points[i].y)));
                }
            }
        }
        Ok(PointSet { points })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> PointSet<T> {
        PointSet { points: idx.iter().map(|&i| self.points[i]).collect() }
    }

    pub fn translated(&self, w: Point<T>) -> PointSet<T> {
        PointSet { points: self.points.iter().map(|&p| p + w).collect() }
    }

    pub fn scaled(&self, r: T) -> PointSet<T> {
        PointSet { points: self.points.iter().map(|&p| p * r).collect() }
    }

    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[..i] {
                d = d.max(p.dist(*q));
            }
        }
        d
    }

    /// Index of `Left(S)`: the lexicographic minimum (real part, then
    /// imaginary part) among `idx`.
    pub fn left(&self, idx: &[usize]) -> usize {
        *idx.iter().min_by(|&&a, &&b| self.points[a].lex_cmp(&self.points[b])).expect("nonempty")
    }
}

/// A bipartition attaining the separation distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub s: T,
    /// Indices of the part containing index 0.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

fn separation_of<T: Real>(pts: &[Point<T>], idx: &[usize]) -> Split<T> {
    let k = idx.len();
    if k < 2 {
        return Split { s: T::zero(), first: idx.to_vec(), second: Vec::new() };
    }
    // Prim's algorithm from idx[0]; edges in construction order.
    let mut in_tree = vec![false; k];
    let mut key = vec![T::infinity(); k];
    let mut parent = vec![0usize; k];
    in_tree[0] = true;
    for j in 1..k {
        key[j] = pts[idx[0]].dist(pts[idx[j]]);
    }
    let mut edges = Vec::with_capacity(k - 1);
    for _ in 1..k {
        let mut best = usize::MAX;
        for j in 0..k {
            if !in_tree[j] && (best == usize::MAX || key[j] < key[best]) {
                best = j;
            }
        }
        in_tree[best] = true;
        edges.push((parent[best], best, key[best]));
        for j in 0..k {
            if !in_tree[j] {
                let d = pts[idx[best]].dist(pts[idx[j]]);
                if d < key[j] {
                    key[j] = d;
                    parent[j] = best;
                }
            }
        }
    }
    let mut cut = 0;
    for (e, &(_, _, w)) in edges.iter().enumerate() {
        if w > edges[cut].2 {
            cut = e;
        }
    }
    let s = edges[cut].2;
    // Component of idx[0] once the bottleneck edge is removed.
    let mut adj = vec![Vec::new(); k];
    for (e, &(u, v, _)) in edges.iter().enumerate() {
        if e != cut {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let first = (0..k).filter(|&j| seen[j]).map(|j| idx[j]).collect();
    let second = (0..k).filter(|&j| !seen[j]).map(|j| idx[j]).collect();
    Split { s, first, second }
}

/// Separation distance `s(S)` and a partition attaining it, via the
/// bottleneck edge of the Euclidean minimum spanning tree.
pub fn separation_split<T: Real>(set: &PointSet<T>) -> Split<T> {
    let idx: Vec<usize> = (0..set.len()).collect();
    separation_of(set.points(), &idx)
}

/// `s(S)` by exhaustive search over bipartitions (exponential; for testing
/// small sets).
pub fn separation_brute_force<T: Real>(set: &PointSet<T>) -> T {
    let k = set.len();
    if k < 2 {
        return T::zero();
    }
    let p = set.points();
    let mut best = T::zero();
    for mask in 1u64..(1u64 << (k - 1)) {
        // bit i set: index i in the first part; index k-1 is always in the second
        let inside = |i: usize| i < k - 1 && (mask >> i) & 1 == 1;
        let mut d = T::infinity();
        for i in (0..k).filter(|&i| inside(i)) {
            for j in (0..k).filter(|&j| !inside(j)) {
                d = d.min(p[i].dist(p[j]));
            }
        }
        best = best.max(d);
    }
    best
}

/// `m = ceil(log s^{-1})`, robust to rounding at exact powers of `e`.
pub fn scale_index(s: f64) -> i64 {
    (-(s.ln()) - 1e-9).ceil() as i64
}

/// Coarse-field values `phi_{from,to}(p)` at isolated points.
pub trait FieldOracle {
    fn band_sum(&mut self, from: i64, to: i64, p: Point<f64>) -> Result<f64>;
}

/// The identically-zero field.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroOracle;

impl FieldOracle for ZeroOracle {
    fn band_sum(&mut self, _from: i64, _to: i64, _p: Point<f64>) -> Result<f64> {
        Ok(0.0)
    }
}

/// Exact joint sampling of the band fields at the queried points: each band
/// is a centred Gaussian process with covariance `C_n`, sampled lazily by
/// conditioning on the values already drawn.
#[derive(Debug)]
pub struct GaussianBandOracle {
    rng: Rng,
    kernel: KernelSpec,
    bands: HashMap<i64, (Vec<Point<f64>>, Vec<f64>)>,
}

impl GaussianBandOracle {
    pub fn new(seed: u64) -> Self {
        GaussianBandOracle { rng: rng::stream(seed, 0, "band-oracle"), kernel: KernelSpec::bump(), bands: HashMap::new() }
    }

    fn band_value(&mut self, n: i64, p: Point<f64>) -> f64 {
        let kernel = self.kernel;
        let (pts, vals) = self.bands.entry(n).or_default();
        if let Some(i) = pts.iter().position(|&q| q == p) {
            return vals[i];
        }
        let c: Vec<f64> = pts.iter().map(|q| kernel.band_covariance(n, p.dist(*q))).collect();
        let z: f64 = self.rng.sample(StandardNormal);
        let v = if c.iter().all(|&x| x == 0.0) {
            z
        } else {
            let m = pts.len();
            let cov: Vec<f64> = (0..m * m).map(|ij| kernel.band_covariance(n, pts[ij / m].dist(pts[ij % m]))).collect();
            let w = solve_spd(&cov, &c, m);
            let mean: f64 = w.iter().zip(vals.iter()).map(|(a, b)| a * b).sum();
            let var = (1.0 - w.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()).max(0.0);
            mean + var.sqrt() * z
        };
        pts.push(p);
        vals.push(v);
        v
    }
}

/// Solves `A x = b` for symmetric positive semidefinite `A` (Cholesky with a
/// tiny jitter).
fn solve_spd(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                l[i * m + i] = (s + 1e-12).max(1e-12).sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * y[k];
        }
        y[i] = s / l[i * m + i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = y[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    x
}

impl FieldOracle for GaussianBandOracle {
    fn band_sum(&mut self, from: i64, to: i64, p: Point<f64>) -> Result<f64> {
        Ok(((from + 1)..=to).map(|n| self.band_value(n, p)).sum())
    }
}

/// Reads band values off sampled grids (bilinear interpolation).
#[derive(Debug, Clone, Default)]
pub struct GridOracle {
    bands: HashMap<i64, BandField<f64>>,
}

impl GridOracle {
    pub fn new(bands: impl IntoIterator<Item = BandField<f64>>) -> Self {
        GridOracle { bands: bands.into_iter().map(|b| (b.n, b)).collect() }
    }
}

impl FieldOracle for GridOracle {
    fn band_sum(&mut self, from: i64, to: i64, p: Point<f64>) -> Result<f64> {
        let mut s = 0.0;
        for n in (from + 1)..=to {
            let b = self.bands.get(&n).ok_or_else(|| Error::Precondition(format!("band {n} not sampled")))?;
            s += b.grid.interpolate(&b.values, p).ok_or_else(|| Error::OutOfDomain(format!("({}, {}) outside band-{n} grid", p.x, p.y)))?;
        }
        Ok(s)
    }
}

/// Label `(m, ψ, η)` of an internal vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub m: i64,
    pub psi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    /// Indices into the tree's point set.
    pub set: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    /// `None` for leaves.
    pub label: Option<Label>,
    /// Index of `Left(S)`.
    pub left: usize,
}

/// The labelled tree `T^a_K`; vertex 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    pub points: PointSet<f64>,
    pub a: i64,
    pub gamma: f64,
    pub vertices: Vec<Vertex>,
}

impl ClusterTree {
    /// Tree shape with `(S, m, η)` labels and `ψ = 0`.
    pub fn shape(points: &PointSet<f64>, a: i64, gamma: f64) -> Result<Self> {
        let k = points.len();
        if k >= 2 {
            let m = scale_index(separation_split(points).s);
            if a > m {
                return Err(Error::Precondition(format!("initial scale a = {a} exceeds ceil(log 1/s(K)) = {m}")));
            }
        }
        let mut t = ClusterTree { points: points.clone(), a, gamma, vertices: Vec::new() };
        t.grow((0..k).collect(), None, 0, a, 0.0);
        Ok(t)
    }

    fn grow(&mut self, set: Vec<usize>, parent: Option<usize>, depth: usize, a: i64, eta0: f64) -> usize {
        let id = self.vertices.len();
        let left = self.points.left(&set);
        if set.len() == 1 {
            self.vertices.push(Vertex { set, parent, children: Vec::new(), depth, label: None, left });
            return id;
        }
        let split = separation_of(self.points.points(), &set);
        let m = scale_index(split.s).max(a);
        let eta = eta0 + self.gamma * ((m - a) as f64) * set.len() as f64;
        self.vertices.push(Vertex { set, parent, children: Vec::new(), depth, label: Some(Label { m, psi: 0.0, eta }), left });
        let c1 = self.grow(split.first, Some(id), depth + 1, m, eta);
        let c2 = self.grow(split.second, Some(id), depth + 1, m, eta);
        self.vertices[id].children = vec![c1, c2];
        id
    }

    /// Fills the `ψ` labels from an oracle: each vertex adds
    /// `phi_{m_parent, m}(Left(S))` to its parent's value.
    pub fn sample_psi(&mut self, oracle: &mut dyn FieldOracle) -> Result<()> {
        for id in 0..self.vertices.len() {
            let v = &self.vertices[id];
            let Some(label) = v.label else { continue };
            let (m0, psi0) = match v.parent {
                None => (self.a, 0.0),
                Some(p) => {
                    let pl = self.vertices[p].label.expect("parents are internal");
                    (pl.m, pl.psi)
                }
            };
            let left = self.points.points()[v.left];
            let psi = psi0 + oracle.band_sum(m0, label.m, left)?;
            self.vertices[id].label = Some(Label { psi, ..label });
        }
        Ok(())
    }

    pub fn root(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn internal(&self) -> impl Iterator<Item = (&Vertex, Label)> {
        self.vertices.iter().filter_map(|v| v.label.map(|l| (v, l)))
    }

    /// Path from the root to vertex `id` (inclusive).
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.vertices[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `η` recomputed non-recursively as `γ Σ (m_i - m_{i-1}) |S_i|`.
    pub fn eta_direct(&self, id: usize) -> Option<f64> {
        self.vertices[id].label?;
        let mut prev = self.a;
        let mut eta = 0.0;
        for v in self.path_to(id) {
            let l = self.vertices[v].label?;
            eta += self.gamma * ((l.m - prev) as f64) * self.vertices[v].set.len() as f64;
            prev = l.m;
        }
        Some(eta)
    }

    /// One vertex per line: `depth;indices;m;psi;eta` (leaves omit labels).
    pub fn to_text(&self) -> String {
        let mut out = String::from("depth;indices;m;psi;eta\n");
        for v in &self.vertices {
            let idx: Vec<String> = v.set.iter().map(|i| i.to_string()).collect();
            match v.label {
                Some(l) => out.push_str(&format!("{};{};{};{:.16e};{:.16e}\n", v.depth, idx.join(","), l.m, l.psi, l.eta)),
                None => out.push_str(&format!("{};{};;;\n", v.depth, idx.join(","))),
            }
        }
        out
    }
}

/// Builds `T^a_K` with `ψ` drawn from `oracle`.
pub fn build_cluster_tree(points: &PointSet<f64>, a: i64, oracle: &mut dyn FieldOracle, gamma: f64) -> Result<ClusterTree> {
    let mut t = ClusterTree::shape(points, a, gamma)?;
    t.sample_psi(oracle)?;
    Ok(t)
}

/// `γ`, `Q`, `ξ`, `δ` and `c_k = kγ - Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConstants {
    pub gamma: f64,
    pub q: f64,
    pub xi: f64,
    pub delta: f64,
}

impl ClusterConstants {
    pub fn new(gamma: f64, d_gamma: f64, delta: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(delta >= 0.0) {
            return Err(Error::Parameter { name: "delta", message: format!("delta = {delta} must be nonnegative") });
        }
        Ok(ClusterConstants { gamma, q: gamma / 2.0 + 2.0 / gamma, xi: gamma / d_gamma, delta })
    }

    pub fn c_k(&self, k: usize) -> f64 {
        k as f64 * self.gamma - self.q
    }
}

/// Whether every internal vertex satisfies `ψ + η + x <= (Q + δ)(m - a)`.
pub fn check_condition(tree: &ClusterTree, x: f64, constants: &ClusterConstants) -> bool {
    let slope = constants.q + constants.delta;
    tree.internal().all(|(_, l)| l.psi + l.eta + x <= slope * ((l.m - tree.a) as f64))
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        Estimate { estimate: stats::mean(xs), std_error: stats::std_error(xs), n_samples: xs.len() }
    }
}

/// `P^{a,x}_K` for each `x` in `xs`, with common random numbers across `xs`.
pub fn estimate_p_many(
    points: &PointSet<f64>,
    a: i64,
    xs: &[f64],
    constants: &ClusterConstants,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if n_samples < 100 {
        return Err(Error::Parameter { name: "n_samples", message: format!("need at least 100 samples, got {n_samples}") });
    }
    if points.len() == 1 {
        return Ok(xs.iter().map(|_| Estimate { estimate: 1.0, std_error: 0.0, n_samples }).collect());
    }
    let shape = ClusterTree::shape(points, a, constants.gamma)?;
    let hits: Vec<Vec<bool>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut t = shape.clone();
            t.sample_psi(&mut GaussianBandOracle::new(rng::derive(seed, i as u64, "cluster-p")))?;
            Ok(xs.iter().map(|&x| check_condition(&t, x, constants)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..xs.len())
        .map(|j| {
            let v: Vec<f64> = hits.iter().map(|h| if h[j] { 1.0 } else { 0.0 }).collect();
            let p = stats::mean(&v);
            Estimate { estimate: p, std_error: (p * (1.0 - p) / n_samples as f64).sqrt(), n_samples }
        })
        .collect())
}

/// Monte Carlo estimate of `P^{a,x}_K`.
pub fn estimate_p(points: &PointSet<f64>, a: i64, x: f64, constants: &ClusterConstants, n_samples: usize, seed: u64) -> Result<Estimate> {
    Ok(estimate_p_many(points, a, &[x], constants, n_samples, seed)?[0])
}

/// Hierarchical importance proposal for `k`-point configurations: the first
/// point is uniform in the disk of radius `radius`; each later point is a
/// uniformly chosen earlier point plus an offset whose length has density
/// `β ρ^{β-1} / ρmax^β` on `(0, ρmax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchicalProposal {
    pub k: usize,
    pub radius: f64,
    pub rho_max: f64,
    pub beta: f64,
}

impl HierarchicalProposal {
    pub fn sample(&self, rng: &mut Rng) -> Vec<Point<f64>> {
        let mut pts = Vec::with_capacity(self.k);
        let r = self.radius * rng.random::<f64>().sqrt();
        let th = 2.0 * PI * rng.random::<f64>();
        pts.push(Point::new(r * th.cos(), r * th.sin()));
        for j in 1..self.k {
            let parent = rng.random_range(0..j);
            let u: f64 = 1.0 - rng.random::<f64>();
            let rho = self.rho_max * u.powf(1.0 / self.beta);
            let th = 2.0 * PI * rng.random::<f64>();
            pts.push(pts[parent] + Point::new(rho * th.cos(), rho * th.sin()));
        }
        pts
    }

    fn offset_density(&self, v: Point<f64>) -> f64 {
        let rho = v.norm();
        if rho <= 0.0 || rho > self.rho_max {
            return 0.0;
        }
        self.beta * rho.powf(self.beta - 2.0) / (2.0 * PI * self.rho_max.powf(self.beta))
    }

    /// Proposal density averaged over all orderings of the points (subset
    /// dynamic programme, `O(2^k k^2)`).
    pub fn symmetric_density(&self, pts: &[Point<f64>]) -> f64 {
        let k = pts.len();
        let full = (1usize << k) - 1;
        let mut v = vec![0.0; 1 << k];
        let root = 1.0 / (PI * self.radius * self.radius);
        for (i, p) in pts.iter().enumerate() {
            if p.norm() <= self.radius {
                v[1 << i] = root;
            }
        }
        for set in 1..=full {
            if v[set] == 0.0 {
                continue;
            }
            let size = (set as u64).count_ones() as f64;
            for j in 0..k {
                if set & (1 << j) != 0 {
                    continue;
                }
                let s: f64 = (0..k).filter(|&i| set & (1 << i) != 0).map(|i| self.offset_density(pts[j] - pts[i])).sum();
                if s > 0.0 {
                    v[set | (1 << j)] += v[set] * s / size;
                }
            }
        }
        let kfact: f64 = (1..=k).map(|i| i as f64).product();
        v[full] / kfact
    }
}

/// Where `δ` enters `u`: the vertex condition (`Q + δ`) or the interaction
/// exponent (`γ² + δ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVariant {
    Condition,
    Exponent,
}

/// Settings for [`estimate_u`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UEstimatorConfig {
    pub n: u32,
    pub k: usize,
    pub gamma: f64,
    pub delta: f64,
    pub variant: DeltaVariant,
    pub n_outer: usize,
    pub n_inner: usize,
}

impl UEstimatorConfig {
    pub fn proposal(&self) -> HierarchicalProposal {
        HierarchicalProposal { k: self.k, radius: self.n as f64, rho_max: E, beta: (2.0 - self.exponent()).max(0.15) }
    }

    fn exponent(&self) -> f64 {
        match self.variant {
            DeltaVariant::Exponent => self.gamma * self.gamma + self.delta,
            DeltaVariant::Condition => self.gamma * self.gamma,
        }
    }
}

/// `u^n_k(x)` for each `x` in `xs` by importance sampling over
/// configurations and Monte Carlo over the field for `P^{0,x}_K`; common
/// random numbers across `xs`.
pub fn estimate_u_many(cfg: &UEstimatorConfig, xs: &[f64], seed: u64) -> Result<Vec<Estimate>> {
    if cfg.k == 0 {
        return Err(Error::Parameter { name: "k", message: "k must be at least 1".into() });
    }
    if cfg.n == 0 {
        return Err(Error::Parameter { name: "n", message: "n must be at least 1".into() });
    }
    if cfg.k > 10 {
        return Err(Error::Parameter { name: "k", message: format!("k = {} too large for the symmetric proposal", cfg.k) });
    }
    if cfg.n_outer < 2 || cfg.n_inner == 0 {
        return Err(Error::Parameter { name: "n_outer", message: "need n_outer >= 2 and n_inner >= 1".into() });
    }
    let d_gamma = 4.0; // ξ is unused by the condition
    let delta_cond = if cfg.variant == DeltaVariant::Condition { cfg.delta } else { 0.0 };
    let constants = ClusterConstants::new(cfg.gamma, d_gamma, delta_cond)?;
    let proposal = cfg.proposal();
    let exponent = cfg.exponent();
    let radius = cfg.n as f64;
    let rows: Vec<Vec<f64>> = (0..cfg.n_outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64, "u-outer");
            let pts = proposal.sample(&mut rng);
            let zero = vec![0.0; xs.len()];
            if pts.iter().any(|p| p.norm() > radius) {
                return Ok(zero);
            }
            let set = match PointSet::new(pts.clone()) {
                Ok(s) => s,
                Err(_) => return Ok(zero),
            };
            if to_f64(separation_split(&set).s) > E {
                return Ok(zero);
            }
            let mut inter = 1.0;
            for a in 0..pts.len() {
                for b in 0..a {
                    inter *= pts[a].dist(pts[b]).powf(-exponent);
                }
            }
            let q = proposal.symmetric_density(&pts);
            if !(q > 0.0) {
                return Err(Error::Precondition("proposal density vanished on its own sample".into()));
            }
            let w = inter / q;
            if cfg.k == 1 {
                return Ok(vec![w; xs.len()]);
            }
            let shape = ClusterTree::shape(&set, 0, cfg.gamma)?;
            let inner_seed = rng::derive(seed, i as u64, "u-inner");
            let mut counts = vec![0usize; xs.len()];
            for j in 0..cfg.n_inner {
                let mut t = shape.clone();
                t.sample_psi(&mut GaussianBandOracle::new(rng::derive(inner_seed, j as u64, "replica")))?;
                for (c, &x) in counts.iter_mut().zip(xs) {
                    *c += check_condition(&t, x, &constants) as usize;
                }
            }
            Ok(counts.iter().map(|&c| w * c as f64 / cfg.n_inner as f64).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..xs.len())
        .map(|j| {
            let v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            Estimate::from_samples(&v)
        })
        .collect())
}

pub fn estimate_u(cfg: &UEstimatorConfig, x: f64, seed: u64) -> Result<Estimate> {
    Ok(estimate_u_many(cfg, &[x], seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(p: &[(f64, f64)]) -> PointSet<f64> {
        PointSet::new(p.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn separation_examples() {
        let s = set(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]);
        let sp = separation_split(&s);
        assert_eq!(sp.s, 4.0);
        assert_eq!(sp.first, vec![0, 1]);
        assert_eq!(sp.second, vec![2]);
        assert_eq!(separation_brute_force(&s), 4.0);
        let line = set(&[(0.0, 0.0), (1.0, 0.0), (10.0, 0.0)]);
        assert_eq!(separation_split(&line).s, 9.0);
        assert_eq!(separation_split(&set(&[(1.0, 1.0)])).s, 0.0);
        assert!(matches!(PointSet::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn scale_index_is_robust() {
        assert_eq!(scale_index((-3.0f64).exp()), 3);
        assert_eq!(scale_index(0.04), 4);
        assert_eq!(scale_index(1.5), 0);
    }

    #[test]
    fn three_point_tree_labels() {
        // root split at m = 2, pair at m = 5
        let e = |m: f64| (-m).exp() * 1.1;
        let k = set(&[(0.0, 0.0), (e(5.0), 0.0), (0.0, e(2.0))]);
        let gamma = 1.5;
        let t = build_cluster_tree(&k, 0, &mut ZeroOracle, gamma).unwrap();
        let root = t.root().label.unwrap();
        assert_eq!(root.m, 2);
        assert_eq!(root.eta, 6.0 * gamma);
        assert_eq!(root.psi, 0.0);
        let pair = t.internal().find(|(v, _)| v.set.len() == 2).unwrap().1;
        assert_eq!(pair.m, 5);
        assert_eq!(pair.eta, 12.0 * gamma);
        let c = ClusterConstants::new(gamma, 4.0, 0.0).unwrap();
        assert!((c.q - 2.08333).abs() < 1e-5);
        assert!(!check_condition(&t, 0.0, &c));
        for (id, v) in t.vertices.iter().enumerate() {
            if let Some(l) = v.label {
                assert_eq!(t.eta_direct(id).unwrap(), l.eta);
            }
        }
        assert!(t.to_text().lines().count() == 1 + t.vertices.len());
    }

    #[test]
    fn singleton_tree_and_precondition() {
        let k = set(&[(0.2, 0.3)]);
        let t = build_cluster_tree(&k, 4, &mut ZeroOracle, 1.0).unwrap();
        assert_eq!(t.vertices.len(), 1);
        let c = ClusterConstants::new(1.0, 3.0, 0.0).unwrap();
        assert!(check_condition(&t, 100.0, &c));
        let p = estimate_p(&k, 0, 3.0, &c, 100, 1).unwrap();
        assert_eq!((p.estimate, p.std_error), (1.0, 0.0));
        let pair = set(&[(0.0, 0.0), (0.1, 0.0)]);
        assert!(matches!(ClusterTree::shape(&pair, 4, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn gaussian_oracle_is_consistent() {
        let mut o = GaussianBandOracle::new(5);
        let p = Point::new(0.1, 0.2);
        let a = o.band_sum(0, 3, p).unwrap();
        let b = o.band_sum(0, 3, p).unwrap();
        assert_eq!(a, b);
        let split = o.band_sum(0, 1, p).unwrap() + o.band_sum(1, 3, p).unwrap();
        assert!((split - a).abs() < 1e-12);
    }

    #[test]
    fn symmetric_density_integrates_to_one_for_pairs() {
        // ∫∫ q = 1 checked by Monte Carlo against the proposal itself:
        // E_q[1/q * 1{A}] estimates |A| for A inside the support.
        let prop = HierarchicalProposal { k: 2, radius: 1.0, rho_max: E, beta: 1.0 };
        let mut rng = rng::stream(3, 0, "t");
        let n = 20000;
        let mut acc = 0.0;
        for _ in 0..n {
            let p = prop.sample(&mut rng);
            if p.iter().all(|z| z.norm() <= 1.0) {
                acc += 1.0 / prop.symmetric_density(&p);
            }
        }
        let est = acc / n as f64;
        assert!((est - PI * PI).abs() < 0.05 * PI * PI, "{est}");
    }

    #[test]
    fn u_errors() {
        let cfg = UEstimatorConfig { n: 1, k: 0, gamma: 1.0, delta: 0.0, variant: DeltaVariant::Condition, n_outer: 10, n_inner: 1 };
        assert_eq!(estimate_u(&cfg, 0.0, 1).unwrap_err().parameter(), Some("k"));
    }
}
