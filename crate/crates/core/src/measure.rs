//! The γ-LQG / GMC volume measure on a grid.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{check_gamma, Error, Result};
use crate::field::{CircleStencil, FieldGrid, StarPlan};
use crate::geometry::{CellMask, GridSpec, Rect};
use crate::scalar::{lit, to_f64, Real};

/// Circle-average node count used for `h_eps`.
pub const MEASURE_CIRCLE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// `eps^{γ²/2} e^{γ h_eps}`
    Lqg,
    /// `e^{γ h_eps - γ²/2 Var h_eps}`
    Gmc,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::Lqg => "lqg",
            Normalization::Gmc => "gmc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lqg" => Ok(Normalization::Lqg),
            "gmc" => Ok(Normalization::Gmc),
            _ => Err(Error::Parameter { name: "normalization", message: format!("expected lqg or gmc, got {s:?}") }),
        }
    }
}

/// Per-cell masses of the measure.
///
/// Cells closer than `margin` steps to the window edge carry no mass: their
/// `eps`-circle leaves the window.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureGrid<T> {
    pub grid: GridSpec<T>,
    pub masses: Vec<T>,
    pub gamma: T,
    pub eps: T,
    pub normalization: Normalization,
    pub total_mass: T,
    pub margin: usize,
}

impl<T: Real> MeasureGrid<T> {
    /// Lebesgue measure (the γ = 0 flat model).
    pub fn lebesgue(grid: GridSpec<T>) -> Self {
        let cell = grid.spacing * grid.spacing;
        let masses = vec![cell; grid.len()];
        let total_mass = masses.iter().fold(T::zero(), |a, &b| a + b);
        MeasureGrid { grid, masses, gamma: T::zero(), eps: T::zero(), normalization: Normalization::Lqg, total_mass, margin: 0 }
    }

    pub fn from_masses(grid: GridSpec<T>, masses: Vec<T>, gamma: T, eps: T, normalization: Normalization, margin: usize) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), found: masses.len() });
        }
        if masses.iter().any(|m| !(*m >= T::zero())) {
            return Err(Error::Parameter { name: "masses", message: "cell masses must be nonnegative".into() });
        }
        let total_mass = masses.iter().fold(T::zero(), |a, &b| a + b);
        Ok(MeasureGrid { grid, masses, gamma, eps, normalization, total_mass, margin })
    }

    pub fn region_volume(&self, mask: &CellMask<T>) -> Result<T> {
        region_volume(self, mask)
    }
}

fn check_eps<T: Real>(grid: &GridSpec<T>, eps: T) -> Result<()> {
    let ratio = to_f64(eps / grid.spacing);
    if ratio < 2.0 * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!("eps = {eps} is below two grid steps ({})", grid.spacing)));
    }
    let log2 = ratio.log2();
    if (log2 - log2.round()).abs() > 1e-6 {
        return Err(Error::Parameter { name: "eps", message: format!("eps must be a dyadic multiple of the spacing, got eps/spacing = {ratio}") });
    }
    Ok(())
}

/// Circle averages `h_eps` at every node (NaN within the margin).
pub fn circle_averages<T: Real>(field: &FieldGrid<T>, eps: T) -> (Vec<T>, usize) {
    let st = CircleStencil::new(field.grid.spacing, eps, MEASURE_CIRCLE_NODES);
    (st.apply(&field.grid, &field.values), st.reach)
}

/// Exact variance of the `eps`-circle average of the synthesised `phi_{a,b}`
/// at a lattice node. Memoised per `(a, b, spacing, eps)`.
pub fn gmc_variance(a: i64, b: i64, spacing: f64, eps: f64) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    type Key = (i64, i64, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, f64>>> = OnceLock::new();
    let key = (a, b, spacing.to_bits(), eps.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    // Lattice covariances do not depend on the window once it exceeds the
    // kernel support, so a small window suffices.
    let support = (-(a as f64)).exp();
    let half = (0.5 * support).max(eps + 4.0 * spacing) * 1.05;
    let plan = StarPlan::<f64>::new(a, b, Rect::centered(half), spacing)?;
    let v = plan.circle_average_variance(eps, MEASURE_CIRCLE_NODES);
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// Builds the measure with `h_eps` from circle averages at each cell centre.
pub fn build_measure<T: Real>(field: &FieldGrid<T>, gamma: T, eps: T, normalization: Normalization) -> Result<MeasureGrid<T>> {
    check_gamma(to_f64(gamma))?;
    check_eps(&field.grid, eps)?;
    let (a, b) = field.band_range;
    let var = match normalization {
        Normalization::Lqg => T::zero(),
        Normalization::Gmc => lit(gmc_variance(a, b, to_f64(field.grid.spacing), to_f64(eps))?),
    };
    let (h_eps, margin) = circle_averages(field, eps);
    let cell = field.grid.spacing * field.grid.spacing;
    let half_g2 = gamma * gamma / lit(2.0);
    let prefactor = match normalization {
        Normalization::Lqg => eps.powf(half_g2),
        Normalization::Gmc => (-half_g2 * var).exp(),
    };
    let masses: Vec<T> = h_eps
        .iter()
        .map(|&h| if h.is_nan() { T::zero() } else { prefactor * (gamma * h).exp() * cell })
        .collect();
    let total_mass = masses.iter().fold(T::zero(), |s, &m| s + m);
    Ok(MeasureGrid { grid: field.grid, masses, gamma, eps, normalization, total_mass, margin })
}

/// Total mass of the masked cells.
pub fn region_volume<T: Real>(measure: &MeasureGrid<T>, mask: &CellMask<T>) -> Result<T> {
    if mask.grid.nx != measure.grid.nx || mask.grid.ny != measure.grid.ny {
        return Err(Error::Shape { expected: measure.grid.len(), found: mask.grid.len() });
    }
    Ok(mask.indices().fold(T::zero(), |s, i| s + measure.masses[i]))
}
