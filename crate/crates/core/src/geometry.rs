//! Planar points, rectangular windows, regular grids and cell masks.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Lexicographic comparison (x first, then y).
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.x
            .partial_cmp(&other.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(self.y.partial_cmp(&other.y).unwrap_or(std::cmp::Ordering::Equal))
    }

    pub fn cast<U: Real>(self) -> Point<U> {
        Point::new(lit(crate::scalar::to_f64(self.x)), lit(crate::scalar::to_f64(self.y)))
    }
}

impl<T: Real> Add for Point<T> {
    type Output = Point<T>;
    fn add(self, o: Self) -> Self {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point<T> {
    type Output = Point<T>;
    fn sub(self, o: Self) -> Self {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point<T> {
    type Output = Point<T>;
    fn mul(self, s: T) -> Self {
        Point::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(min: Point<T>, max: Point<T>) -> Self {
        Rect { min, max }
    }

    /// Square `[-half, half]^2`.
    pub fn centered(half: T) -> Self {
        Rect::new(Point::new(-half, -half), Point::new(half, half))
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn padded(&self, pad: T) -> Self {
        Rect::new(
            Point::new(self.min.x - pad, self.min.y - pad),
            Point::new(self.max.x + pad, self.max.y + pad),
        )
    }
}

/// A regular lattice of nodes `origin + (ix, iy) * spacing`, stored row-major
/// (`index = iy * nx + ix`). Each node stands for the square cell of side
/// `spacing` centred on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub origin: Point<T>,
    pub spacing: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(origin: Point<T>, spacing: T, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::Parameter {
                name: "spacing",
                message: "grid spacing must be positive and finite".into(),
            });
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Parameter {
                name: "dims",
                message: format!("grid needs at least 2x2 nodes, got {nx}x{ny}"),
            });
        }
        Ok(GridSpec { origin, spacing, nx, ny })
    }

    /// Smallest grid with the given spacing whose nodes cover `window`.
    pub fn covering(window: Rect<T>, spacing: T) -> Result<Self> {
        let nx = (window.width() / spacing - lit(1e-9)).ceil().to_usize().unwrap_or(0) + 1;
        let ny = (window.height() / spacing - lit(1e-9)).ceil().to_usize().unwrap_or(0) + 1;
        GridSpec::new(window.min, spacing, nx, ny)
    }

    /// `n x n` grid on `[-half, half]^2`.
    pub fn square(half: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter { name: "resolution", message: "need at least 2 nodes".into() });
        }
        let spacing = half * lit(2.0) / from_usize::<T>(n - 1);
        GridSpec::new(Point::new(-half, -half), spacing, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn position(&self, ix: usize, iy: usize) -> Point<T> {
        Point::new(
            self.origin.x + from_usize::<T>(ix) * self.spacing,
            self.origin.y + from_usize::<T>(iy) * self.spacing,
        )
    }

    #[inline]
    pub fn position_of(&self, idx: usize) -> Point<T> {
        let (ix, iy) = self.coords(idx);
        self.position(ix, iy)
    }

    pub fn bounds(&self) -> Rect<T> {
        Rect::new(self.origin, self.position(self.nx - 1, self.ny - 1))
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        self.bounds().contains(p)
    }

    /// Index of the node nearest to `p`.
    pub fn nearest(&self, p: Point<T>) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain(format!(
                "point ({}, {}) lies outside the grid window",
                p.x, p.y
            )));
        }
        let fx = ((p.x - self.origin.x) / self.spacing).round();
        let fy = ((p.y - self.origin.y) / self.spacing).round();
        let ix = fx.to_usize().unwrap_or(0).min(self.nx - 1);
        let iy = fy.to_usize().unwrap_or(0).min(self.ny - 1);
        Ok(self.index(ix, iy))
    }

    /// Lower-left node and fractional offsets for bilinear interpolation.
    #[inline]
    pub fn locate(&self, p: Point<T>) -> Option<(usize, usize, T, T)> {
        let gx = (p.x - self.origin.x) / self.spacing;
        let gy = (p.y - self.origin.y) / self.spacing;
        let max_x = from_usize::<T>(self.nx - 1);
        let max_y = from_usize::<T>(self.ny - 1);
        if !(gx >= T::zero() && gy >= T::zero() && gx <= max_x && gy <= max_y) {
            return None;
        }
        let ix = gx.floor().to_usize()?.min(self.nx - 2);
        let iy = gy.floor().to_usize()?.min(self.ny - 2);
        Some((ix, iy, gx - from_usize(ix), gy - from_usize(iy)))
    }

    /// Bilinear interpolation of row-major `values` at `p`.
    #[inline]
    pub fn interpolate(&self, values: &[T], p: Point<T>) -> Option<T> {
        let (ix, iy, fx, fy) = self.locate(p)?;
        let i00 = self.index(ix, iy);
        let one = T::one();
        let v00 = values[i00];
        let v10 = values[i00 + 1];
        let v01 = values[i00 + self.nx];
        let v11 = values[i00 + self.nx + 1];
        Some((one - fy) * ((one - fx) * v00 + fx * v10) + fy * ((one - fx) * v01 + fx * v11))
    }

    /// Distance in grid steps from node `idx` to the nearest grid edge.
    pub fn border_distance(&self, idx: usize) -> usize {
        let (ix, iy) = self.coords(idx);
        ix.min(iy).min(self.nx - 1 - ix).min(self.ny - 1 - iy)
    }

    /// The 4-neighbours of a node.
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (ix, iy) = self.coords(idx);
        let nx = self.nx;
        let ny = self.ny;
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].into_iter().filter_map(move |(dx, dy)| {
            let jx = ix as i64 + dx;
            let jy = iy as i64 + dy;
            (jx >= 0 && jy >= 0 && (jx as usize) < nx && (jy as usize) < ny)
                .then(|| jy as usize * nx + jx as usize)
        })
    }
}

/// What a [`CellMask`] was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    MetricBall,
    EuclideanDisk,
    Proxy,
    Region,
    Cover,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskQuery<T> {
    pub center: Point<T>,
    pub radius: T,
    pub kind: MaskKind,
}

/// Boolean selection of grid cells with the query that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask<T> {
    pub grid: GridSpec<T>,
    cells: Vec<bool>,
    pub query: MaskQuery<T>,
    /// Set when the selection touches the window boundary and is therefore
    /// unreliable as a ball.
    pub truncated: bool,
}

impl<T: Real> CellMask<T> {
    pub fn empty(grid: GridSpec<T>, query: MaskQuery<T>) -> Self {
        CellMask { grid, cells: vec![false; grid.len()], query, truncated: false }
    }

    pub fn full(grid: GridSpec<T>) -> Self {
        CellMask {
            grid,
            cells: vec![true; grid.len()],
            query: MaskQuery { center: Point::origin(), radius: T::infinity(), kind: MaskKind::Region },
            truncated: false,
        }
    }

    pub fn from_fn(grid: GridSpec<T>, query: MaskQuery<T>, f: impl Fn(Point<T>) -> bool) -> Self {
        let cells = (0..grid.len()).map(|i| f(grid.position_of(i))).collect();
        CellMask { grid, cells, query, truncated: false }
    }

    /// Cells whose centre lies in the closed Euclidean disk.
    pub fn disk(grid: GridSpec<T>, center: Point<T>, radius: T) -> Self {
        let q = MaskQuery { center, radius, kind: MaskKind::EuclideanDisk };
        CellMask::from_fn(grid, q, |p| p.dist(center) <= radius)
    }

    /// Cells whose centre lies in the closed rectangle.
    pub fn rect(grid: GridSpec<T>, rect: Rect<T>) -> Self {
        let q = MaskQuery { center: Point::origin(), radius: T::zero(), kind: MaskKind::Region };
        CellMask::from_fn(grid, q, |p| rect.contains(p))
    }

    pub fn from_cells(grid: GridSpec<T>, cells: Vec<bool>, query: MaskQuery<T>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), found: cells.len() });
        }
        Ok(CellMask { grid, cells, query, truncated: false })
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: bool) {
        self.cells[idx] = v;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, &c)| c.then_some(i))
    }

    pub fn is_subset_of(&self, other: &CellMask<T>) -> bool {
        self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn intersect(&self, other: &CellMask<T>) -> Result<CellMask<T>> {
        self.check_shape(other)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a && b).collect();
        Ok(CellMask { grid: self.grid, cells, query: self.query, truncated: self.truncated })
    }

    pub fn union(&self, other: &CellMask<T>) -> Result<CellMask<T>> {
        self.check_shape(other)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a || b).collect();
        Ok(CellMask { grid: self.grid, cells, query: self.query, truncated: self.truncated || other.truncated })
    }

    pub fn check_shape(&self, other: &CellMask<T>) -> Result<()> {
        if self.cells.len() != other.cells.len() || self.grid.nx != other.grid.nx {
            return Err(Error::Shape { expected: self.cells.len(), found: other.cells.len() });
        }
        Ok(())
    }

    /// True if a selected cell lies within `margin` steps of the grid edge.
    pub fn touches_border(&self, margin: usize) -> bool {
        self.indices().any(|i| self.grid.border_distance(i) <= margin)
    }

    /// Fills every unselected component that does not reach the grid edge
    /// (4-connectivity), i.e. the complementary regions enclosed by the mask.
    pub fn filled(&self) -> CellMask<T> {
        let g = self.grid;
        let mut outside = vec![false; g.len()];
        let mut stack: Vec<usize> = (0..g.len())
            .filter(|&i| !self.cells[i] && g.border_distance(i) == 0)
            .collect();
        for &i in &stack {
            outside[i] = true;
        }
        while let Some(i) = stack.pop() {
            for j in g.neighbors4(i) {
                if !self.cells[j] && !outside[j] {
                    outside[j] = true;
                    stack.push(j);
                }
            }
        }
        let cells = outside.iter().map(|&o| !o).collect();
        CellMask { grid: g, cells, query: self.query, truncated: self.truncated }
    }
}
