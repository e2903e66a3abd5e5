//! Simulation toolkit for Liouville quantum gravity on grids.

pub mod cluster;
pub mod error;
pub mod experiments;
pub mod field;
pub mod geometry;
pub mod io;
pub mod lbm;
pub mod measure;
pub mod metric;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod voronoi;

pub use error::{Error, Result};
pub use scalar::Real;

pub use experiments::{Calibration, Environment, LqgSetup, ScalingFit};
pub use geometry::{CellMask, GridSpec, Point, Rect};
pub use measure::Normalization;
pub use metric::MetricConstants;

/// Double-precision instantiations.
pub type Point64 = geometry::Point<f64>;
pub type Grid64 = geometry::GridSpec<f64>;
pub type Mask64 = geometry::CellMask<f64>;
pub type Field64 = field::FieldGrid<f64>;
pub type Measure64 = measure::MeasureGrid<f64>;
pub type Metric64 = metric::MetricGraph<f64>;
pub type Tessellation64 = voronoi::Tessellation<f64>;

/// Single-precision instantiations.
pub type Field32 = field::FieldGrid<f32>;
pub type Measure32 = measure::MeasureGrid<f32>;
pub type Metric32 = metric::MetricGraph<f32>;
