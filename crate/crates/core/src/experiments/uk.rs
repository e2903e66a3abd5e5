use rayon::prelude::*;

use crate::cluster::HierarchicalProposal;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// Importance-sampled `u_k(r)` with convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// `k γ² >= 4`: the integral is infinite.
    pub analytic_divergence: bool,
    /// The running mean moved by more than four standard errors between
    /// the half-way point and the end, or is not finite (sampled points
    /// closer than floating point resolves).
    pub cauchy_failed: bool,
}

impl UkEstimate {
    pub fn divergent(&self) -> bool {
        self.analytic_divergence || self.cauchy_failed
    }
}

/// `u_k(r) = ∫_{(rD)^k} Π_{i<j} |z_i - z_j|^{-γ²} dz` by hierarchical
/// importance sampling.
pub fn euclidean_uk_mc(k: usize, gamma: f64, r: f64, n_samples: usize, seed: u64) -> Result<UkEstimate> {
    if k == 0 || k > 10 {
        return Err(Error::Parameter { name: "k", message: format!("k must lie in 1..=10, got {k}") });
    }
    if !(gamma >= 0.0 && gamma < 2.0) {
        return Err(Error::Parameter { name: "gamma", message: format!("gamma = {gamma} must lie in [0, 2)") });
    }
    if !(r > 0.0) {
        return Err(Error::Parameter { name: "r", message: "radius must be positive".into() });
    }
    if n_samples < 2 {
        return Err(Error::Parameter { name: "n_samples", message: "need at least 2 samples".into() });
    }
    let g2 = gamma * gamma;
    let proposal = HierarchicalProposal { k, radius: r, rho_max: 2.0 * r, beta: (2.0 - g2).max(0.15) };
    let w: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64, "uk");
            let pts = proposal.sample(&mut rng);
            if pts.iter().any(|p| p.norm() > r) {
                return 0.0;
            }
            let mut inter = 1.0;
            for a in 0..k {
                for b in 0..a {
                    inter *= pts[a].dist(pts[b]).powf(-g2);
                }
            }
            inter / proposal.symmetric_density(&pts)
        })
        .collect();
    let est = stats::mean(&w);
    let se = stats::std_error(&w);
    let half = stats::mean(&w[..n_samples / 2]);
    Ok(UkEstimate {
        estimate: est,
        std_error: se,
        n_samples,
        analytic_divergence: k as f64 * g2 >= 4.0,
        cauchy_failed: !est.is_finite() || (half - est).abs() > 4.0 * se + 1e-12 * est.abs(),
    })
}
