//! Desk-scale measurements built from the field, measure, metric, lbm and
//! voronoi modules.
//!
//! Every experiment draws replica `i` from streams derived from
//! `(seed, i, label)` and aggregates in replica order, so results do not
//! depend on the thread count.

mod minkowski;
mod moments;
mod scaling;
mod tutte;
mod uk;

pub use minkowski::{greedy_cover, greedy_packing, minkowski_estimate, MinkowskiResult, MinkowskiRow, PackingCheck};
pub use moments::{ball_moment_estimate, ball_volumes, tail_curve, BallKind, MomentRow, TailRow};
pub use scaling::{
    d_gamma_self_consistency, exit_time_scaling_fit, inscribed_radius, inscribed_radius_stat, volume_scaling_fit, DGammaIteration,
    ExitSampleRow, InscribedRow, InscribedStat, ScalingResult, VolumeSampleRow,
};
pub use tutte::{compare_walks, tutte_experiment, TutteRow};
pub use uk::{euclidean_uk_mc, UkEstimate};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::field::{FieldGrid, StarPlan};
use crate::geometry::GridSpec;
use crate::measure::{build_measure, MeasureGrid, Normalization};
use crate::metric::{calibrate, MetricConstants, MetricGraph};
use crate::rng;
use crate::stats;

/// Largest tolerated fraction of boundary-truncated samples at any scale.
pub const MAX_TRUNCATED_FRACTION: f64 = 0.2;

/// How the metric calibration constant is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    Fixed(f64),
    /// Median of `D(0, 1)` over this many fresh replicas.
    Median(usize),
}

/// Shared field/measure/metric settings of the LQG experiments. `gamma = 0`
/// selects the flat model: zero field, Lebesgue measure, unit weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqgSetup {
    pub gamma: f64,
    pub d_gamma: f64,
    /// The window is `[-half_width, half_width]^2`.
    pub half_width: f64,
    /// Grid nodes per side.
    pub resolution: usize,
    /// Top band; defaults to the finest band the grid resolves.
    pub top_band: Option<i64>,
    /// `eps / spacing`, a power of two at least 2.
    pub eps_cells: usize,
    pub normalization: Normalization,
    pub calibration: Calibration,
}

impl LqgSetup {
    pub fn flat(half_width: f64, resolution: usize) -> Self {
        LqgSetup {
            gamma: 0.0,
            d_gamma: 2.0,
            half_width,
            resolution,
            top_band: None,
            eps_cells: 4,
            normalization: Normalization::Gmc,
            calibration: Calibration::Fixed(1.0),
        }
    }

    pub fn is_flat(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn grid(&self) -> Result<GridSpec<f64>> {
        if self.resolution < 16 {
            return Err(Error::Parameter { name: "resolution", message: format!("need at least 16 nodes per side, got {}", self.resolution) });
        }
        if !(self.half_width > 0.0) {
            return Err(Error::Parameter { name: "half_width", message: "window half width must be positive".into() });
        }
        GridSpec::square(self.half_width, self.resolution)
    }
}

/// One replica's field, measure and metric.
pub struct Replica {
    pub field: FieldGrid<f64>,
    pub measure: MeasureGrid<f64>,
    pub graph: MetricGraph<f64>,
}

/// Precomputed synthesis plan and calibration for an [`LqgSetup`].
pub struct Environment {
    pub setup: LqgSetup,
    pub grid: GridSpec<f64>,
    pub constants: MetricConstants,
    pub plan: Option<StarPlan<f64>>,
    pub calibration: f64,
    pub eps: f64,
    pub top_band: i64,
}

impl Environment {
    pub fn new(setup: LqgSetup, seed: u64) -> Result<Self> {
        let grid = setup.grid()?;
        let h = grid.spacing;
        if setup.eps_cells < 2 || !setup.eps_cells.is_power_of_two() {
            return Err(Error::Parameter { name: "eps_cells", message: format!("eps/spacing must be a power of two >= 2, got {}", setup.eps_cells) });
        }
        let eps = setup.eps_cells as f64 * h;
        if setup.is_flat() {
            return Ok(Environment { setup, grid, constants: MetricConstants::flat(), plan: None, calibration: 1.0, eps, top_band: 0 });
        }
        let constants = MetricConstants::new(setup.gamma, setup.d_gamma)?;
        let max = StarPlan::<f64>::max_band(h);
        let top_band = setup.top_band.unwrap_or(max);
        if top_band < 1 {
            return Err(Error::Resolution(format!("spacing {h} resolves no band; refine the grid")));
        }
        if top_band > max {
            return Err(Error::Resolution(format!("band {top_band} needs spacing <= e^-{top_band}/8; finest resolvable is {max}")));
        }
        let plan = StarPlan::new(0, top_band, grid.bounds(), h)?;
        let calibration = match setup.calibration {
            Calibration::Fixed(c) if c > 0.0 => c,
            Calibration::Fixed(_) => return Err(Error::Parameter { name: "calibration", message: "calibration must be positive".into() }),
            Calibration::Median(n) => calibrate(&plan, constants, n, rng::derive(seed, 0, "calibration-run"))?,
        };
        Ok(Environment { setup, grid, constants, plan: Some(plan), calibration, eps, top_band })
    }

    pub fn field(&self, seed: u64, i: usize) -> FieldGrid<f64> {
        match &self.plan {
            Some(p) => p.sample(rng::derive(seed, i as u64, "replica")),
            None => FieldGrid::zeros(self.grid),
        }
    }

    pub fn replica(&self, seed: u64, i: usize) -> Result<Replica> {
        let field = self.field(seed, i);
        let (measure, graph) = if self.setup.is_flat() {
            (MeasureGrid::lebesgue(self.grid), MetricGraph::flat(self.grid).with_margin(1))
        } else {
            let m = build_measure(&field, self.setup.gamma, self.eps, self.setup.normalization)?;
            let g = MetricGraph::with_constants(&field, self.constants, self.calibration).with_margin(m.margin + 1);
            (m, g)
        };
        Ok(Replica { field, measure, graph })
    }
}

/// Log-log fit of a statistic against scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub scales: Vec<f64>,
    pub statistics: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Half width of a 95% interval for the slope.
    pub ci_half_width: f64,
    /// Samples used at each scale.
    pub n_used: Vec<usize>,
    /// Fraction of samples discarded at each scale.
    pub discard_rate: Vec<f64>,
}

impl ScalingFit {
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

/// Checks a scale ladder: at least 4 increasing positive scales spanning a
/// decade.
pub fn check_ladder(ladder: &[f64], name: &'static str) -> Result<()> {
    if ladder.len() < 4 {
        return Err(Error::Parameter { name, message: format!("need at least 4 scales, got {}", ladder.len()) });
    }
    if ladder.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter { name, message: "scales must be positive and strictly increasing".into() });
    }
    if ladder[ladder.len() - 1] / ladder[0] < 10.0 * (1.0 - 1e-9) {
        return Err(Error::Parameter { name, message: "scales must span at least one decade".into() });
    }
    Ok(())
}

fn slope_of(scales: &[f64], stats_: &[f64], invert: bool) -> stats::LinearFit {
    let xs: Vec<f64> = scales.iter().map(|s| if invert { -s.ln() } else { s.ln() }).collect();
    let ys: Vec<f64> = stats_.iter().map(|v| v.ln()).collect();
    stats::linear_fit(&xs, &ys)
}

/// Fits `log median(sample)` against `log scale` (or `log 1/scale` when
/// `invert`). `samples[j]` holds the valid samples at scale `j`; the slope
/// interval comes from resampling replicas.
pub(crate) fn median_fit(scales: &[f64], samples: &[Vec<f64>], totals: &[usize], invert: bool, seed: u64) -> ScalingFit {
    let meds: Vec<f64> = samples.iter().map(|s| stats::median(s)).collect();
    let fit = slope_of(scales, &meds, invert);
    let mut rng = rng::stream(seed, 0, "bootstrap");
    let mut slopes = Vec::with_capacity(400);
    for _ in 0..400 {
        let m: Vec<f64> = samples
            .iter()
            .map(|s| {
                let b: Vec<f64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                stats::median(&b)
            })
            .collect();
        slopes.push(slope_of(scales, &m, invert).slope);
    }
    let (lo, hi) = (stats::quantile(&slopes, 0.025), stats::quantile(&slopes, 0.975));
    ScalingFit {
        scales: scales.to_vec(),
        statistics: meds,
        slope: fit.slope,
        intercept: fit.intercept,
        ci_half_width: 0.5 * (hi - lo),
        n_used: samples.iter().map(|s| s.len()).collect(),
        discard_rate: samples.iter().zip(totals).map(|(s, &t)| 1.0 - s.len() as f64 / t.max(1) as f64).collect(),
    }
}

/// Aborts when too many samples at some scale were discarded.
pub(crate) fn check_truncation(scales: &[f64], used: &[usize], total: usize) -> Result<()> {
    for (s, &u) in scales.iter().zip(used) {
        let rate = 1.0 - u as f64 / total.max(1) as f64;
        if rate > MAX_TRUNCATED_FRACTION || u == 0 {
            return Err(Error::Truncation(format!(
                "{:.0}% of samples at scale {s} touch the window boundary; enlarge the window or shrink the ladder",
                100.0 * rate
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_checks() {
        assert!(check_ladder(&[0.01, 0.02, 0.05, 0.1], "s").is_ok());
        assert!(check_ladder(&[0.01, 0.02, 0.05], "s").is_err());
        assert!(check_ladder(&[0.01, 0.02, 0.05, 0.09], "s").is_err());
        assert!(check_ladder(&[0.01, 0.05, 0.02, 0.1], "s").is_err());
    }

    #[test]
    fn flat_environment() {
        let env = Environment::new(LqgSetup::flat(0.5, 65), 1).unwrap();
        let r = env.replica(1, 0).unwrap();
        assert!(r.field.values.iter().all(|v| *v == 0.0));
        assert_eq!(env.calibration, 1.0);
        let mut s = LqgSetup::flat(0.5, 65);
        s.gamma = 1.0;
        s.d_gamma = 3.0;
        s.top_band = Some(9);
        assert!(matches!(Environment::new(s, 1), Err(Error::Resolution(_))));
    }
}
