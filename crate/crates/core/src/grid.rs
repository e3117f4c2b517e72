//! Uniform grids and sampled scalar fields.
//!
//! Torus nodes sit at `(i·Lx/nx, j·Ly/ny)` for `i < nx`, `j < ny`. The planar
//! box `[-R, R]²` is split into `nx × ny` intervals; only the interior nodes
//! `(-R + i·hx, -R + j·hy)` with `1 <= i < nx`, `1 <= j < ny` are stored, the
//! boundary values being zero for the Dirichlet unknowns. Values are row-major
//! with `x` varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl TorusGeometry {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(VortexError::Domain(format!(
                "cell sides must be positive, got Lx = {lx}, Ly = {ly}"
            )));
        }
        if nx < 8 || ny < 8 {
            return Err(VortexError::Domain(format!(
                "grid needs at least 8 points per side, got {nx} x {ny}"
            )));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0.0..self.lx).contains(&p[0]) && (0.0..self.ly).contains(&p[1])
    }

    /// Same cell at a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new(self.lx, self.ly, nx, ny)
    }

    /// Componentwise displacement `x - p` to the nearest periodic image of `p`.
    pub fn nearest_displacement(&self, x: [f64; 2], p: [f64; 2]) -> [f64; 2] {
        let wrap = |d: f64, len: f64| d - len * (d / len).round();
        [wrap(x[0] - p[0], self.lx), wrap(x[1] - p[1], self.ly)]
    }
}

/// The square box `[-R, R]²` standing in for the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarTruncation {
    pub half_width: f64,
    pub nx: usize,
    pub ny: usize,
}

impl PlanarTruncation {
    pub fn new(half_width: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(VortexError::Domain(format!(
                "box half-width must be positive, got R = {half_width}"
            )));
        }
        if nx < 8 || ny < 8 {
            return Err(VortexError::Domain(format!(
                "grid needs at least 8 intervals per side, got {nx} x {ny}"
            )));
        }
        Ok(Self { half_width, nx, ny })
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.half_width / self.ny as f64
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0].abs() < self.half_width && p[1].abs() < self.half_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Grid {
    Torus(TorusGeometry),
    Plane(PlanarTruncation),
}

impl Grid {
    /// Stored points per row and number of rows.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Grid::Torus(t) => (t.nx, t.ny),
            Grid::Plane(p) => (p.nx - 1, p.ny - 1),
        }
    }

    pub fn len(&self) -> usize {
        let (c, r) = self.shape();
        c * r
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        match self {
            Grid::Torus(t) => (t.hx(), t.hy()),
            Grid::Plane(p) => (p.hx(), p.hy()),
        }
    }

    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        let (hx, hy) = self.spacing();
        hx * hy
    }

    /// Coordinates of node `(i, j)` in storage indexing.
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        match self {
            Grid::Torus(t) => [i as f64 * t.hx(), j as f64 * t.hy()],
            Grid::Plane(p) => [
                -p.half_width + (i + 1) as f64 * p.hx(),
                -p.half_width + (j + 1) as f64 * p.hy(),
            ],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let (c, r) = self.shape();
        (0..r).flat_map(move |j| (0..c).map(move |i| self.node(i, j)))
    }

    pub fn torus(&self) -> Option<&TorusGeometry> {
        match self {
            Grid::Torus(t) => Some(t),
            Grid::Plane(_) => None,
        }
    }

    pub fn plane(&self) -> Option<&PlanarTruncation> {
        match self {
            Grid::Plane(p) => Some(p),
            Grid::Torus(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: grid.nodes().map(f).collect(),
            grid,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VortexError::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Uniform-weight quadrature; trapezoidal on the torus and on the box
    /// (boundary samples of the box are zero).
    pub fn integrate(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Concatenates equally shaped fields into one component-major buffer.
    pub fn flatten(fields: &[ScalarField2D]) -> (Grid, Vec<f64>) {
        let grid = fields[0].grid;
        let mut out = Vec::with_capacity(grid.len() * fields.len());
        for f in fields {
            debug_assert_eq!(f.grid, grid);
            out.extend_from_slice(&f.values);
        }
        (grid, out)
    }

    pub fn unflatten(grid: Grid, flat: Vec<f64>, components: usize) -> Vec<ScalarField2D> {
        let n = grid.len();
        assert_eq!(flat.len(), n * components);
        flat.chunks(n)
            .map(|c| ScalarField2D {
                grid,
                values: c.to_vec(),
            })
            .collect()
    }
}
