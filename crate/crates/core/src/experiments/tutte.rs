use super::{Environment, LqgSetup};
use crate::error::{Error, Result};
use crate::geometry::{CellMask, Point};
use crate::rng;
use crate::voronoi::{poisson_sample, tutte_embedding, voronoi_partition, Embedding, TutteMethod};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TutteRow {
    pub lambda: f64,
    pub replica: usize,
    pub n_sites: usize,
    pub n_boundary: usize,
    pub harmonic_residual: f64,
    /// Root-mean-square `|Φ(z) - z|` over active sites.
    pub rms_displacement: f64,
    /// Largest `|h_walk - h_exact| / SE` over boundary sites, where `h` is
    /// the hitting probability and `SE = sqrt(h_exact (1 - h_exact) / n)`
    /// (NaN without walks).
    pub walk_max_z: f64,
    /// Fraction of boundary sites whose walk estimate lies within 3 SE.
    pub walk_within_3se: f64,
}

/// Poisson–Voronoi tessellation of the unit disk at each intensity,
/// embedded by the exact harmonic solve and optionally by `n_walks` random
/// walks for comparison.
pub fn tutte_experiment(setup: &LqgSetup, lambdas: &[f64], n_replicas: usize, n_walks: usize, seed: u64) -> Result<Vec<TutteRow>> {
    if lambdas.is_empty() || n_replicas == 0 {
        return Err(Error::Parameter { name: "lambdas", message: "need at least one intensity and replica".into() });
    }
    let env = Environment::new(*setup, seed)?;
    if !env.grid.bounds().contains(Point::new(1.0, 1.0)) {
        return Err(Error::OutOfDomain("the unit disk does not fit in the window".into()));
    }
    let domain = CellMask::disk(env.grid, Point::origin(), 1.0);
    let anchor = Point::new(1.0 - 2.0 * env.grid.spacing, 0.0);
    let mut rows = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        for i in 0..n_replicas {
            let r = env.replica(seed, i)?;
            let s = rng::derive(seed, (li * n_replicas + i) as u64, "tutte");
            let sites = poisson_sample(&r.measure, lambda, &domain, rng::derive(s, 0, "sites"))?;
            let tess = voronoi_partition(&r.graph, &sites, &domain)?;
            let e = tutte_embedding(&tess, TutteMethod::LinearSolve, 0, 0, Point::origin(), anchor)?;
            let (walk_max_z, walk_within_3se) = if n_walks > 0 {
                let w = tutte_embedding(&tess, TutteMethod::WalkMc, n_walks, rng::derive(s, 0, "walks"), Point::origin(), anchor)?;
                compare_walks(&e, &w, n_walks)
            } else {
                (f64::NAN, f64::NAN)
            };
            let mut ss = 0.0;
            let mut n = 0usize;
            for (k, p) in e.positions.iter().enumerate() {
                if tess.active[k] {
                    ss += (p.x - sites[k].x).powi(2) + (p.y - sites[k].y).powi(2);
                    n += 1;
                }
            }
            rows.push(TutteRow {
                lambda,
                replica: i,
                n_sites: n,
                n_boundary: tess.boundary_sites.len(),
                harmonic_residual: e.harmonic_residual,
                rms_displacement: (ss / n as f64).sqrt(),
                walk_max_z,
                walk_within_3se,
            });
        }
    }
    Ok(rows)
}

/// Largest standardized deviation of walk hitting frequencies from the
/// exact hitting probabilities, and the fraction within 3 SE.
pub fn compare_walks(exact: &Embedding, walk: &Embedding, n_walks: usize) -> (f64, f64) {
    let mut worst = 0.0f64;
    let mut ok = 0usize;
    for (&h, &f) in exact.hits.iter().zip(&walk.hits) {
        let se = (h * (1.0 - h) / n_walks as f64).max(0.0).sqrt();
        let d = (h - f).abs();
        let z = if d <= 1e-12 { 0.0 } else if se == 0.0 { f64::INFINITY } else { d / se };
        worst = worst.max(z);
        ok += (z <= 3.0) as usize;
    }
    (worst, ok as f64 / exact.hits.len() as f64)
}
