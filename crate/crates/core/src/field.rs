//! ⋆-scale invariant Gaussian fields.
//!
//! The field `phi = sum_n phi_n` is white noise on `C x [0, 1]` smoothed by a
//! radial bump `k` at every scale `t`; band `n` collects the scales
//! `t in [e^{-n}, e^{-(n-1)}]`. Each band has unit pointwise variance and
//! finite range of dependence `e^{-n}`, and `phi_n(z)` has the law of
//! `phi_1(z e^{n-1})`.
//!
//! A band is synthesised on a padded periodic grid: the `t`-integral is
//! replaced by a geometric midpoint rule, every node contributes a discrete
//! kernel normalised to carry exactly its share of the variance, and the sum
//! of the node covariances is applied as a single spectral filter.

use std::f64::consts::{E, PI};
use std::sync::{Arc, OnceLock};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Point, Rect};
use crate::rng;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::stats;

/// Geometric midpoint nodes per band for the scale integral.
pub const NODES_PER_BAND: usize = 4;

/// Smallest admissible circle-average node count.
pub const MIN_CIRCLE_NODES: usize = 64;

/// Radial bump `A (1 - (r/R)^2)^3` on `r < R = 1/(2e)`, normalised in `L^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub radius: f64,
    pub amplitude: f64,
    /// `L^2` norm of the profile over the plane.
    pub l2_norm: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::bump()
    }
}

impl KernelSpec {
    pub fn bump() -> Self {
        let radius = 1.0 / (2.0 * E);
        // int k^2 = pi A^2 R^2 / 7
        let amplitude = (7.0 / (PI * radius * radius)).sqrt();
        KernelSpec { radius, amplitude, l2_norm: 1.0 }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let u = r / self.radius;
        let v = 1.0 - u * u;
        self.amplitude * v * v * v
    }

    /// `int k^2` by Gauss–Legendre quadrature in the radius.
    pub fn l2_norm_sq_numeric(&self) -> f64 {
        let k = *self;
        2.0 * PI * stats::integrate(|r| k.value(r).powi(2) * r, 0.0, self.radius, 16, 1)
    }

    /// `c = k * k` evaluated at distance `r` (tabulated, linear interpolation).
    pub fn autocorrelation(&self, r: f64) -> f64 {
        let t = autocorrelation_table();
        interp_table(&t.values, t.step, r)
    }

    /// Covariance `C_1(r) = int_{1/e}^{1} c(r/t) dt/t` of the first band.
    pub fn band1_covariance(&self, r: f64) -> f64 {
        let t = band_covariance_table();
        interp_table(&t.values, t.step, r)
    }

    /// Covariance `C_n(r) = C_1(e^{n-1} r)` of band `n`.
    pub fn band_covariance(&self, n: i64, r: f64) -> f64 {
        self.band1_covariance(r * ((n - 1) as f64).exp())
    }
}

struct Table {
    step: f64,
    values: Vec<f64>,
}

fn interp_table(values: &[f64], step: f64, r: f64) -> f64 {
    let r = r.abs();
    let pos = r / step;
    let i = pos.floor() as usize;
    if i + 1 >= values.len() {
        return 0.0;
    }
    let f = pos - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

const TABLE_POINTS: usize = 801;

fn autocorrelation_table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let k = KernelSpec::bump();
        let rmax = 2.0 * k.radius;
        let step = rmax / (TABLE_POINTS - 1) as f64;
        let (xr, wr) = stats::gauss_legendre(24);
        let (xt, wt) = stats::gauss_legendre(24);
        let radial_panels = 8;
        let angular_panels = 16;
        let values = (0..TABLE_POINTS)
            .map(|i| {
                let r = i as f64 * step;
                let mut total = 0.0;
                let hr = k.radius / radial_panels as f64;
                let ht = PI / angular_panels as f64;
                for pr in 0..radial_panels {
                    for (a, wa) in xr.iter().zip(&wr) {
                        let rho = hr * (pr as f64 + 0.5 * (a + 1.0));
                        let kr = k.value(rho);
                        if kr == 0.0 {
                            continue;
                        }
                        let mut ang = 0.0;
                        for pt in 0..angular_panels {
                            for (b, wb) in xt.iter().zip(&wt) {
                                let th = ht * (pt as f64 + 0.5 * (b + 1.0));
                                let d = (rho * rho + r * r - 2.0 * rho * r * th.cos()).max(0.0).sqrt();
                                ang += wb * k.value(d);
                            }
                        }
                        total += wa * kr * rho * ang * 0.5 * ht;
                    }
                }
                2.0 * total * 0.5 * hr
            })
            .collect();
        Table { step, values }
    })
}

fn band_covariance_table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let k = KernelSpec::bump();
        let rmax = 1.0 / E;
        let step = rmax / (TABLE_POINTS - 1) as f64;
        let values = (0..TABLE_POINTS)
            .map(|i| {
                let r = i as f64 * step;
                // t = e^u, dt/t = du, u in [-1, 0]
                stats::integrate(|u| k.autocorrelation(r * (-u).exp()), -1.0, 0.0, 16, 8)
            })
            .collect();
        Table { step, values }
    })
}

/// Scale nodes `t_j` of band `n` (geometric midpoints).
pub fn band_nodes(n: i64) -> Vec<f64> {
    (0..NODES_PER_BAND)
        .map(|j| (-(n as f64) + (j as f64 + 0.5) / NODES_PER_BAND as f64).exp())
        .collect()
}

/// Logarithmic point source `alpha * min(log|z - center|^{-1}, log cap^{-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity<T> {
    pub center: Point<T>,
    pub alpha: T,
    pub cap_radius: T,
}

impl<T: Real> Singularity<T> {
    #[inline]
    pub fn value_at(&self, p: Point<T>) -> T {
        let d = p.dist(self.center).max(self.cap_radius);
        -self.alpha * d.ln()
    }
}

/// One sampled band `phi_n` on a regular grid.
#[derive(Debug, Clone)]
pub struct BandField<T> {
    pub n: i64,
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    pub quadrature_nodes: Vec<T>,
}

/// A sampled field on a regular grid: `phi_{a,b}` plus recorded singularities
/// and normalisation shift.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    /// `(a, b)`: the field holds bands `a+1 ..= b`.
    pub band_range: (i64, i64),
    pub singularities: Vec<Singularity<T>>,
    /// Constant added by normalisation conventions (0 if none applied).
    pub shift: T,
}

impl<T: Real> FieldGrid<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        FieldGrid { grid, values: vec![T::zero(); grid.len()], band_range: (0, 0), singularities: Vec::new(), shift: T::zero() }
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        let mut f = FieldGrid::zeros(grid);
        f.values.iter_mut().for_each(|v| *v = c);
        f
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<T>, band_range: (i64, i64)) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), found: values.len() });
        }
        Ok(FieldGrid { grid, values, band_range, singularities: Vec::new(), shift: T::zero() })
    }

    pub fn spacing(&self) -> T {
        self.grid.spacing
    }

    #[inline]
    pub fn value(&self, p: Point<T>) -> Option<T> {
        self.grid.interpolate(&self.values, p)
    }

    /// The field plus a constant.
    pub fn shifted(&self, c: T) -> Self {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v += c);
        f.shift += c;
        f
    }

    /// Pointwise sum of two fields on the same grid.
    pub fn plus(&self, other: &FieldGrid<T>) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape { expected: self.grid.len(), found: other.grid.len() });
        }
        let mut f = self.clone();
        f.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += *b);
        f.singularities.extend(other.singularities.iter().copied());
        f.shift += other.shift;
        Ok(f)
    }

    /// Mean of the field over the circle `|z - center| = radius`.
    pub fn circle_average(&self, center: Point<T>, radius: T, n_nodes: usize) -> Result<T> {
        circle_average(self, center, radius, n_nodes)
    }

    /// Shifts the field so its average over the unit circle about the origin
    /// vanishes (the `h_1(0) = 0` convention).
    pub fn normalize_unit_circle(&self) -> Result<Self> {
        let avg = circle_average(self, Point::origin(), T::one(), 256)?;
        Ok(self.shifted(-avg))
    }
}

fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Precomputed spectral synthesis of one band on a fixed analysis grid.
pub struct BandPlan<T: Real> {
    pub n: i64,
    pub grid: GridSpec<T>,
    pad: usize,
    px: usize,
    py: usize,
    filter: Vec<T>,
    row_fwd: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    nodes: Vec<f64>,
    covariance: OnceLock<Vec<T>>,
}

impl<T: Real> std::fmt::Debug for BandPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandPlan").field("n", &self.n).field("grid", &self.grid).field("padded", &(self.px, self.py)).finish()
    }
}

fn fft2<T: Real>(
    data: &mut [Complex<T>],
    px: usize,
    py: usize,
    row: &Arc<dyn Fft<T>>,
    col: &Arc<dyn Fft<T>>,
    tmp: &mut Vec<Complex<T>>,
) {
    row.process(data);
    tmp.resize(px * py, Complex::new(T::zero(), T::zero()));
    for y in 0..py {
        for x in 0..px {
            tmp[x * py + y] = data[y * px + x];
        }
    }
    col.process(tmp);
    for x in 0..px {
        for y in 0..py {
            data[y * px + x] = tmp[x * py + y];
        }
    }
}

impl<T: Real> BandPlan<T> {
    pub fn new(n: i64, window: Rect<T>, spacing: T) -> Result<Self> {
        if n < 1 {
            return Err(Error::Parameter { name: "band", message: format!("band index must be >= 1, got {n}") });
        }
        let h = to_f64(spacing);
        let finest = (-(n as f64)).exp();
        if !(h > 0.0) || h > finest / 8.0 * (1.0 + 1e-9) {
            return Err(Error::Resolution(format!(
                "spacing {h} too coarse for band {n}: need spacing <= e^-{n}/8 = {}",
                finest / 8.0
            )));
        }
        let kernel = KernelSpec::bump();
        let support = 2.0 * kernel.radius * (-(n as f64 - 1.0)).exp();
        if to_f64(window.width()) < support || to_f64(window.height()) < support {
            return Err(Error::Resolution(format!(
                "window {}x{} smaller than the band-{n} kernel support {support}",
                window.width(),
                window.height()
            )));
        }
        let grid = GridSpec::covering(window, spacing)?;
        // the band covariance vanishes beyond e^-n, so this much padding on
        // each side keeps the periodic field's covariance exact in the window
        let pad = (finest / h).ceil() as usize + 2;
        let px = next_smooth(grid.nx + 2 * pad);
        let py = next_smooth(grid.ny + 2 * pad);

        let mut planner = FftPlanner::<T>::new();
        let row_fwd = planner.plan_fft_forward(px);
        let col_fwd = planner.plan_fft_forward(py);
        let row_inv = planner.plan_fft_inverse(px);
        let col_inv = planner.plan_fft_inverse(py);

        let nodes = band_nodes(n);
        let weight = 1.0 / NODES_PER_BAND as f64;
        let zero = Complex::new(T::zero(), T::zero());
        let mut power = vec![T::zero(); px * py];
        let mut buf = vec![zero; px * py];
        let mut tmp = Vec::new();
        for &t in &nodes {
            let reach = (kernel.radius * t / h).ceil() as i64 + 1;
            let mut taps = Vec::new();
            let mut norm = 0.0;
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let r = h * ((dx * dx + dy * dy) as f64).sqrt();
                    let v = kernel.value(r / t);
                    if v > 0.0 {
                        taps.push((dx, dy, v));
                        norm += v * v;
                    }
                }
            }
            if taps.is_empty() {
                return Err(Error::Resolution(format!("band {n} kernel not resolved at spacing {h}")));
            }
            let scale = (weight / norm).sqrt();
            buf.iter_mut().for_each(|c| *c = zero);
            for (dx, dy, v) in taps {
                let x = dx.rem_euclid(px as i64) as usize;
                let y = dy.rem_euclid(py as i64) as usize;
                buf[y * px + x].re += lit::<T>(v * scale);
            }
            fft2(&mut buf, px, py, &row_fwd, &col_fwd, &mut tmp);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p += c.norm_sqr();
            }
        }
        let filter = power.into_iter().map(|p| p.max(T::zero()).sqrt()).collect();
        Ok(BandPlan {
            n,
            grid,
            pad,
            px,
            py,
            filter,
            row_fwd,
            col_fwd,
            row_inv,
            col_inv,
            nodes,
            covariance: OnceLock::new(),
        })
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (self.px, self.py)
    }

    fn spectral_apply(&self, buf: &mut [Complex<T>]) {
        let mut tmp = Vec::new();
        fft2(buf, self.px, self.py, &self.row_fwd, &self.col_fwd, &mut tmp);
        for (c, s) in buf.iter_mut().zip(&self.filter) {
            *c = *c * *s;
        }
        fft2(buf, self.px, self.py, &self.row_inv, &self.col_inv, &mut tmp);
    }

    /// Draws `phi_n` on the analysis grid.
    pub fn sample(&self, seed: u64) -> BandField<T> {
        let mut rng = rng::stream(seed, self.n as u64, "band-noise");
        let mut buf: Vec<Complex<T>> = (0..self.px * self.py)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                Complex::new(lit(z), T::zero())
            })
            .collect();
        self.spectral_apply(&mut buf);
        let inv_n = T::one() / from_usize::<T>(self.px * self.py);
        let g = self.grid;
        let mut values = Vec::with_capacity(g.len());
        for iy in 0..g.ny {
            let row = (iy + self.pad) * self.px + self.pad;
            values.extend(buf[row..row + g.nx].iter().map(|c| c.re * inv_n));
        }
        BandField { n: self.n, grid: g, values, quadrature_nodes: self.nodes.iter().map(|&t| lit(t)).collect() }
    }

    /// Exact covariance of the synthesised band between lattice nodes
    /// separated by `(dx, dy)` steps.
    pub fn lattice_covariance(&self, dx: i64, dy: i64) -> T {
        let cov = self.covariance.get_or_init(|| {
            let zero = Complex::new(T::zero(), T::zero());
            let mut buf = vec![zero; self.px * self.py];
            buf[0] = Complex::new(T::one(), T::zero());
            // filter applied twice = power spectrum
            self.spectral_apply(&mut buf);
            self.spectral_apply(&mut buf);
            let inv = T::one() / from_usize::<T>(self.px * self.py).powi(2);
            buf.into_iter().map(|c| c.re * inv).collect()
        });
        let x = dx.rem_euclid(self.px as i64) as usize;
        let y = dy.rem_euclid(self.py as i64) as usize;
        cov[y * self.px + x]
    }
}

/// Synthesis plan for `phi_{a,b}` on a fixed window.
#[derive(Debug)]
pub struct StarPlan<T: Real> {
    pub a: i64,
    pub b: i64,
    pub grid: GridSpec<T>,
    pub bands: Vec<BandPlan<T>>,
}

impl<T: Real> StarPlan<T> {
    pub fn new(a: i64, b: i64, window: Rect<T>, spacing: T) -> Result<Self> {
        if a < 0 {
            return Err(Error::Parameter { name: "a", message: format!("band offset a = {a} must be >= 0") });
        }
        let grid = GridSpec::covering(window, spacing)?;
        let bands = ((a + 1)..=b).map(|n| BandPlan::new(n, window, spacing)).collect::<Result<Vec<_>>>()?;
        Ok(StarPlan { a, b, grid, bands })
    }

    /// Largest band resolvable at this spacing (`spacing <= e^{-b}/8`).
    pub fn max_band(spacing: f64) -> i64 {
        (1.0 / (8.0 * spacing) * (1.0 + 1e-9)).ln().floor() as i64
    }

    pub fn band_seed(seed: u64, n: i64) -> u64 {
        rng::derive(seed, n as u64, "band")
    }

    pub fn sample(&self, seed: u64) -> FieldGrid<T> {
        let mut f = FieldGrid::zeros(self.grid);
        f.band_range = (self.a, self.b);
        for plan in &self.bands {
            let band = plan.sample(StarPlan::<T>::band_seed(seed, plan.n));
            f.values.iter_mut().zip(&band.values).for_each(|(v, b)| *v += *b);
        }
        f
    }

    /// Exact variance of the circle average of the synthesised field around a
    /// lattice node.
    pub fn circle_average_variance(&self, radius: T, n_nodes: usize) -> T {
        let stencil = CircleStencil::new(self.grid.spacing, radius, n_nodes);
        let mut var = T::zero();
        for plan in &self.bands {
            for &(ax, ay, wa) in &stencil.taps {
                for &(bx, by, wb) in &stencil.taps {
                    var += wa * wb * plan.lattice_covariance(ax - bx, ay - by);
                }
            }
        }
        var
    }
}

/// Samples band `n` on `window` at the given spacing.
pub fn sample_band_field<T: Real>(n: i64, window: Rect<T>, spacing: T, seed: u64) -> Result<BandField<T>> {
    Ok(BandPlan::new(n, window, spacing)?.sample(seed))
}

/// Samples `phi_{a,b} = phi_{a+1} + ... + phi_b` (zero when `a >= b`). Band
/// `n` is driven by [`StarPlan::band_seed`]`(seed, n)`.
pub fn sample_star_field<T: Real>(a: i64, b: i64, window: Rect<T>, spacing: T, seed: u64) -> Result<FieldGrid<T>> {
    Ok(StarPlan::new(a, b, window, spacing)?.sample(seed))
}

fn check_circle<T: Real>(grid: &GridSpec<T>, center: Point<T>, radius: T, n_nodes: usize) -> Result<()> {
    if n_nodes < MIN_CIRCLE_NODES {
        return Err(Error::Parameter { name: "n_nodes", message: format!("need at least {MIN_CIRCLE_NODES} nodes, got {n_nodes}") });
    }
    if radius < grid.spacing * lit(2.0) * lit(1.0 - 1e-9) {
        return Err(Error::Resolution(format!("circle radius {radius} below two grid steps ({})", grid.spacing)));
    }
    let b = grid.bounds();
    if center.x - radius < b.min.x || center.x + radius > b.max.x || center.y - radius < b.min.y || center.y + radius > b.max.y {
        return Err(Error::OutOfDomain(format!("circle of radius {radius} about ({}, {}) exits the window", center.x, center.y)));
    }
    Ok(())
}

/// Mean of the bilinearly interpolated field at `n_nodes` equally spaced
/// angles on the circle.
pub fn circle_average<T: Real>(field: &FieldGrid<T>, center: Point<T>, radius: T, n_nodes: usize) -> Result<T> {
    check_circle(&field.grid, center, radius, n_nodes)?;
    let mut total = T::zero();
    for k in 0..n_nodes {
        let th: T = lit::<T>(2.0 * PI) * from_usize(k) / from_usize(n_nodes);
        let p = Point::new(center.x + radius * th.cos(), center.y + radius * th.sin());
        total += field
            .value(p)
            .ok_or_else(|| Error::OutOfDomain("circle node outside the window".into()))?;
    }
    Ok(total / from_usize(n_nodes))
}

/// Circle average around a lattice node expressed as lattice taps.
#[derive(Debug, Clone)]
pub struct CircleStencil<T> {
    pub radius: T,
    pub taps: Vec<(i64, i64, T)>,
    /// Largest tap offset in grid steps.
    pub reach: usize,
}

impl<T: Real> CircleStencil<T> {
    pub fn new(spacing: T, radius: T, n_nodes: usize) -> Self {
        let mut acc: std::collections::BTreeMap<(i64, i64), T> = Default::default();
        let w = T::one() / from_usize(n_nodes);
        for k in 0..n_nodes {
            let th: T = lit::<T>(2.0 * PI) * from_usize(k) / from_usize(n_nodes);
            let gx = radius * th.cos() / spacing;
            let gy = radius * th.sin() / spacing;
            let fx0 = gx.floor();
            let fy0 = gy.floor();
            let fx = gx - fx0;
            let fy = gy - fy0;
            let ix = fx0.to_i64().unwrap_or(0);
            let iy = fy0.to_i64().unwrap_or(0);
            let one = T::one();
            for (dx, dy, ww) in [
                (0, 0, (one - fx) * (one - fy)),
                (1, 0, fx * (one - fy)),
                (0, 1, (one - fx) * fy),
                (1, 1, fx * fy),
            ] {
                *acc.entry((ix + dx, iy + dy)).or_insert(T::zero()) += ww * w;
            }
        }
        let taps: Vec<_> = acc.into_iter().filter(|(_, w)| *w != T::zero()).map(|((x, y), w)| (x, y, w)).collect();
        let reach = taps.iter().map(|&(x, y, _)| x.unsigned_abs().max(y.unsigned_abs()) as usize).max().unwrap_or(0);
        CircleStencil { radius, taps, reach }
    }

    /// Circle averages at every node at least `reach` steps from the edge;
    /// other nodes are `NaN`.
    pub fn apply(&self, grid: &GridSpec<T>, values: &[T]) -> Vec<T> {
        let r = self.reach;
        let mut out = vec![T::nan(); grid.len()];
        if grid.nx <= 2 * r || grid.ny <= 2 * r {
            return out;
        }
        let nx = grid.nx as i64;
        for iy in r..grid.ny - r {
            for ix in r..grid.nx - r {
                let base = (iy * grid.nx + ix) as i64;
                let mut s = T::zero();
                for &(dx, dy, w) in &self.taps {
                    s += w * values[(base + dy * nx + dx) as usize];
                }
                out[iy * grid.nx + ix] = s;
            }
        }
        out
    }
}

/// Adds `alpha * log|z - center|^{-1}` (clamped inside `cap_radius`).
pub fn add_log_singularity<T: Real>(field: &FieldGrid<T>, center: Point<T>, alpha: T, cap_radius: T) -> Result<FieldGrid<T>> {
    if !field.grid.contains(center) {
        return Err(Error::OutOfDomain(format!("singularity centre ({}, {}) outside the window", center.x, center.y)));
    }
    if !(cap_radius >= field.grid.spacing) {
        return Err(Error::Parameter {
            name: "cap_radius",
            message: format!("cap radius {cap_radius} must be at least one grid step ({})", field.grid.spacing),
        });
    }
    let s = Singularity { center, alpha, cap_radius };
    let mut out = field.clone();
    if alpha != T::zero() {
        for (i, v) in out.values.iter_mut().enumerate() {
            *v += s.value_at(field.grid.position_of(i));
        }
    }
    out.singularities.push(s);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_l2_normalised_and_supported() {
        let k = KernelSpec::bump();
        assert!((k.l2_norm_sq_numeric() - 1.0).abs() < 1e-6);
        assert_eq!(k.value(k.radius), 0.0);
        assert!(k.value(0.0) > 0.0);
        assert!((0..100).all(|i| k.value(i as f64 * 0.002) >= 0.0));
    }

    #[test]
    fn autocorrelation_is_one_at_zero_and_vanishes_beyond_support() {
        let k = KernelSpec::bump();
        assert!((k.autocorrelation(0.0) - 1.0).abs() < 1e-5, "{}", k.autocorrelation(0.0));
        assert_eq!(k.autocorrelation(1.0 / E + 1e-6), 0.0);
        assert!((k.band1_covariance(0.0) - 1.0).abs() < 1e-5);
        assert_eq!(k.band1_covariance(0.4), 0.0);
        assert!(k.band_covariance(3, 0.01) > 0.0);
        assert_eq!(k.band_covariance(3, (-3.0f64).exp() * 1.01), 0.0);
    }

    #[test]
    fn band_resolution_and_window_checks() {
        let w = Rect::centered(1.0);
        assert!(matches!(BandPlan::<f64>::new(2, w, 0.03), Err(Error::Resolution(_))));
        assert!(matches!(BandPlan::<f64>::new(1, Rect::centered(0.05), 0.01), Err(Error::Resolution(_))));
        assert!(BandPlan::<f64>::new(1, w, 0.04).is_ok());
    }

    #[test]
    fn equal_seeds_give_identical_grids() {
        let w = Rect::centered(0.5);
        let a = sample_band_field::<f64>(2, w, 0.01, 7).unwrap();
        let b = sample_band_field::<f64>(2, w, 0.01, 7).unwrap();
        let c = sample_band_field::<f64>(2, w, 0.01, 8).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn synthesised_band_has_unit_variance_exactly() {
        let plan = BandPlan::<f64>::new(2, Rect::centered(0.5), 0.01).unwrap();
        assert!((plan.lattice_covariance(0, 0) - 1.0).abs() < 1e-10);
        // finite range: beyond e^{-2} (in steps) the covariance vanishes
        let far = ((-2.0f64).exp() / 0.01).ceil() as i64 + 1;
        assert!(plan.lattice_covariance(far, 0).abs() < 1e-12);
    }

    #[test]
    fn zero_band_range_is_zero_field() {
        let f = sample_star_field::<f64>(3, 3, Rect::centered(0.5), 0.01, 1).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        let g = sample_star_field::<f64>(4, 2, Rect::centered(0.5), 0.01, 1).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn star_field_is_sum_of_bands() {
        let w = Rect::centered(0.4);
        let h = 0.005;
        let star = sample_star_field::<f64>(1, 3, w, h, 99).unwrap();
        let mut sum = vec![0.0; star.values.len()];
        for n in 2..=3 {
            let b = sample_band_field::<f64>(n, w, h, StarPlan::<f64>::band_seed(99, n)).unwrap();
            sum.iter_mut().zip(&b.values).for_each(|(s, v)| *s += v);
        }
        assert_eq!(star.values, sum);
    }

    #[test]
    fn circle_average_of_constant_and_linearity() {
        let g = GridSpec::square(1.0, 101).unwrap();
        let c = FieldGrid::<f64>::constant(g, 2.5);
        let avg = circle_average(&c, Point::new(0.1, -0.2), 0.3, 64).unwrap();
        assert!((avg - 2.5).abs() < 1e-12);
        let f = FieldGrid::from_values(g, (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect(), (0, 0)).unwrap();
        let h = FieldGrid::from_values(g, (0..g.len()).map(|i| (i as f64 * 0.11).cos()).collect(), (0, 0)).unwrap();
        let z = Point::new(0.05, 0.1);
        let lhs = circle_average(&f.plus(&h).unwrap(), z, 0.25, 128).unwrap();
        let rhs = circle_average(&f, z, 0.25, 128).unwrap() + circle_average(&h, z, 0.25, 128).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn circle_average_errors() {
        let g = GridSpec::square(1.0, 101).unwrap();
        let f = FieldGrid::zeros(g);
        assert!(matches!(circle_average(&f, Point::new(0.9, 0.0), 0.2, 64), Err(Error::OutOfDomain(_))));
        assert!(matches!(circle_average(&f, Point::origin(), 0.01, 64), Err(Error::Resolution(_))));
        assert!(matches!(circle_average(&f, Point::origin(), 0.5, 16), Err(Error::Parameter { .. })));
    }

    #[test]
    fn stencil_matches_direct_circle_average() {
        let g = GridSpec::square(1.0, 81).unwrap();
        let f = FieldGrid::from_values(g, (0..g.len()).map(|i| (i as f64 * 0.7).sin()).collect(), (0, 0)).unwrap();
        let st = CircleStencil::new(g.spacing, 0.1, 64);
        let all = st.apply(&g, &f.values);
        let idx = g.index(40, 37);
        let direct = circle_average(&f, g.position_of(idx), 0.1, 64).unwrap();
        assert!((all[idx] - direct).abs() < 1e-12);
        assert!(all[0].is_nan());
    }

    #[test]
    fn log_singularity_values() {
        let g = GridSpec::square(1.0, 201).unwrap();
        let z = FieldGrid::zeros(g);
        let center = Point::origin();
        let f = add_log_singularity(&z, center, 1.0, 2.0 * g.spacing).unwrap();
        let s = f.singularities[0];
        assert!((s.value_at(Point::new((-1.0f64).exp(), 0.0)) - 1.0).abs() < 1e-12);
        let f2 = add_log_singularity(&z, center, 2.0, 0.01).unwrap();
        assert!((f2.singularities[0].value_at(Point::new(0.0, (-3.0f64).exp())) - 6.0).abs() < 1e-12);
        let same = add_log_singularity(&z, center, 0.0, 0.02).unwrap();
        assert_eq!(same.values, z.values);
        assert!(add_log_singularity(&z, Point::new(3.0, 0.0), 1.0, 0.02).is_err());
        assert!(add_log_singularity(&z, center, 1.0, 1e-4).is_err());
    }

    #[test]
    fn log_singularity_is_additive_outside_cap() {
        let g = GridSpec::square(1.0, 101).unwrap();
        let z = FieldGrid::<f64>::zeros(g);
        let c = Point::new(0.1, 0.0);
        let cap = 0.05;
        let two = add_log_singularity(&add_log_singularity(&z, c, 0.7, cap).unwrap(), c, 0.45, cap).unwrap();
        let one = add_log_singularity(&z, c, 1.15, cap).unwrap();
        for i in 0..g.len() {
            if g.position_of(i).dist(c) > cap {
                assert!((two.values[i] - one.values[i]).abs() <= 1e-13 * (1.0 + one.values[i].abs()));
            }
        }
    }
}
