//! Liouville Brownian motion: planar Brownian paths run on the quantum clock
//! `F(t) = ∫ eps^{γ²/2} e^{γ h_eps(B_s)} ds`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{circle_average, FieldGrid, MIN_CIRCLE_NODES};
use crate::geometry::Point;
use crate::metric::{MetricGraph, Stop, Workspace};
use crate::rng;
use crate::scalar::{from_usize, lit, Real};

/// Default cap on Euler steps per path.
pub const DEFAULT_MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPath<T> {
    pub times: Vec<T>,
    pub positions: Vec<Point<T>>,
    pub dt: T,
    /// The step cap was hit before the stop condition.
    pub capped: bool,
}

impl<T: Real> PlanarPath<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn end_time(&self) -> T {
        *self.times.last().expect("paths contain the start")
    }
}

/// Euler scheme with `N(0, dt)` increments per coordinate, stopped at the
/// first position where `stop` holds (the start included).
pub fn simulate_bm_path<T: Real>(
    start: Point<T>,
    dt: T,
    stop: impl Fn(Point<T>) -> bool,
    max_steps: usize,
    seed: u64,
) -> Result<PlanarPath<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Parameter { name: "dt", message: format!("dt = {dt} must be positive") });
    }
    let mut rng = rng::stream(seed, 0, "bm-path");
    let sd = dt.sqrt();
    let mut times = vec![T::zero()];
    let mut positions = vec![start];
    let mut p = start;
    let mut capped = true;
    if stop(p) {
        capped = false;
    } else {
        for step in 1..=max_steps {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            p = Point::new(p.x + sd * lit(zx), p.y + sd * lit(zy));
            times.push(dt * from_usize(step));
            positions.push(p);
            if stop(p) {
                capped = false;
                break;
            }
        }
    }
    Ok(PlanarPath { times, positions, dt, capped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumClock<T> {
    /// `F` at the path's times.
    pub values: Vec<T>,
    pub eps: T,
    pub gamma: T,
}

/// Clock rate `eps^{γ²/2} e^{γ h_eps(p)}` at a point.
pub fn clock_rate<T: Real>(field: &FieldGrid<T>, p: Point<T>, gamma: T, eps: T) -> Result<T> {
    let h = circle_average(field, p, eps, MIN_CIRCLE_NODES)?;
    Ok(eps.powf(gamma * gamma / lit(2.0)) * (gamma * h).exp())
}

/// Trapezoidal accumulation of the clock rate along the path.
pub fn quantum_clock<T: Real>(path: &PlanarPath<T>, field: &FieldGrid<T>, gamma: T, eps: T) -> Result<QuantumClock<T>> {
    if !(gamma >= T::zero() && gamma <= lit(2.0)) {
        return Err(Error::Parameter { name: "gamma", message: format!("gamma = {gamma} must lie in [0, 2]") });
    }
    if eps < field.grid.spacing * lit(2.0) * lit(1.0 - 1e-9) {
        return Err(Error::Resolution(format!("eps = {eps} is below two grid steps")));
    }
    let rates = path.positions.iter().map(|&p| clock_rate(field, p, gamma, eps)).collect::<Result<Vec<T>>>()?;
    let half: T = lit(0.5);
    let mut values = Vec::with_capacity(rates.len());
    let mut f = T::zero();
    values.push(f);
    for i in 1..rates.len() {
        f += (path.times[i] - path.times[i - 1]) * (rates[i] + rates[i - 1]) * half;
        values.push(f);
    }
    Ok(QuantumClock { values, eps, gamma })
}

/// One exit-time sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample<T> {
    pub s: T,
    pub tau: T,
    /// Euclidean exit time of the same path.
    pub euclidean_time: T,
    /// False for truncated balls or capped paths.
    pub valid: bool,
}

/// Settings shared by exit-time computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitConfig<T> {
    pub gamma: T,
    pub eps: T,
    pub dt: T,
    pub max_steps: usize,
}

/// Quantum exit times of one Brownian path from the nested metric balls
/// `B_s(z)` for every `s` in `s_ladder` (sorted increasingly). The path runs
/// until it leaves the largest ball, so exit times are monotone in `s`.
pub fn exit_times<T: Real>(
    z: Point<T>,
    s_ladder: &[T],
    field: &FieldGrid<T>,
    graph: &MetricGraph<T>,
    cfg: &ExitConfig<T>,
    seed: u64,
) -> Result<Vec<ExitSample<T>>> {
    if s_ladder.windows(2).any(|w| w[1] < w[0]) || s_ladder.iter().any(|s| *s < T::zero()) {
        return Err(Error::Parameter { name: "s_ladder", message: "radii must be nonnegative and sorted".into() });
    }
    let Some(&s_max) = s_ladder.last() else { return Ok(Vec::new()) };
    let g = graph.grid;
    let c = g.nearest(z)?;
    let mut ws = Workspace::new();
    graph.search(&mut ws, &[c], None, Stop::Radius(s_max));
    let mut dist = std::collections::HashMap::new();
    let mut truncated_at = T::infinity();
    for (i, d) in ws.settled() {
        if d <= s_max {
            dist.insert(i, d);
            if g.border_distance(i) <= graph.margin {
                truncated_at = truncated_at.min(d);
            }
        }
    }
    let node_dist = |p: Point<T>| -> T {
        g.nearest(p).ok().and_then(|i| dist.get(&i).copied()).unwrap_or(T::infinity())
    };
    let path = simulate_bm_path(z, cfg.dt, |p| node_dist(p) > s_max, cfg.max_steps, seed)?;
    let clock = match quantum_clock(&path, field, cfg.gamma, cfg.eps) {
        Ok(c) => c,
        // only possible when a truncated ball lets the path reach the edge
        Err(Error::OutOfDomain(_)) => {
            let bad = |s| ExitSample { s, tau: T::infinity(), euclidean_time: T::infinity(), valid: false };
            return Ok(s_ladder.iter().map(|&s| bad(s)).collect());
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(s_ladder.len());
    let mut idx = 0;
    for &s in s_ladder {
        if s == T::zero() {
            out.push(ExitSample { s, tau: T::zero(), euclidean_time: T::zero(), valid: true });
            continue;
        }
        let inside = |p: Point<T>| node_dist(p) <= s;
        while idx < path.len() && inside(path.positions[idx]) {
            idx += 1;
        }
        let valid = !path.capped && s < truncated_at;
        if idx >= path.len() {
            out.push(ExitSample { s, tau: T::infinity(), euclidean_time: T::infinity(), valid: false });
            continue;
        }
        if idx == 0 {
            out.push(ExitSample { s, tau: T::zero(), euclidean_time: T::zero(), valid });
            continue;
        }
        // crossing fraction on the last segment by bisection
        let (a, b) = (path.positions[idx - 1], path.positions[idx]);
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..40 {
            let mid = (lo + hi) * lit(0.5);
            if inside(a + (b - a) * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let f = hi;
        let tau = clock.values[idx - 1] + (clock.values[idx] - clock.values[idx - 1]) * f;
        let et = path.times[idx - 1] + (path.times[idx] - path.times[idx - 1]) * f;
        out.push(ExitSample { s, tau, euclidean_time: et, valid });
    }
    Ok(out)
}

/// Quantum exit time `τ(z; B_s(z))` of one path.
#[allow(clippy::too_many_arguments)]
pub fn lbm_exit_time<T: Real>(
    z: Point<T>,
    s: T,
    field: &FieldGrid<T>,
    graph: &MetricGraph<T>,
    gamma: T,
    eps: T,
    dt: T,
    seed: u64,
) -> Result<ExitSample<T>> {
    let cfg = ExitConfig { gamma, eps, dt, max_steps: DEFAULT_MAX_STEPS };
    Ok(exit_times(z, &[s], field, graph, &cfg, seed)?[0])
}
