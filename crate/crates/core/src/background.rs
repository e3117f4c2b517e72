//! Singular background functions carrying the vortex sources.
//!
//! The background `u⁰` is `-∞` at every vortex, so it is stored through
//! `exp_u0 = e^{u⁰}` (exactly zero at a vortex sitting on a node) together
//! with a finite regular part `u0_reg`.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::grid::{Grid, PlanarTruncation, ScalarField2D, TorusGeometry};
use crate::spectral::SpectralOps;
use crate::torus;

/// Problem definition: `l` components, each with its list of zeros
/// (repetitions encode multiplicity), on a torus cell or a planar box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexSpec {
    pub l: usize,
    pub points: Vec<Vec<[f64; 2]>>,
    pub domain: Grid,
}

impl VortexSpec {
    pub fn new(l: usize, points: Vec<Vec<[f64; 2]>>, domain: Grid) -> Result<Self> {
        if l < 2 {
            return Err(VortexError::Domain(format!(
                "component count l = {l}; at least 2 components are required"
            )));
        }
        if points.len() != l {
            return Err(VortexError::Shape {
                expected: l,
                got: points.len(),
            });
        }
        for (j, list) in points.iter().enumerate() {
            for p in list {
                let inside = match &domain {
                    Grid::Torus(t) => t.contains(*p),
                    Grid::Plane(b) => p[0].hypot(p[1]) < b.half_width && b.contains(*p),
                };
                if !inside {
                    return Err(VortexError::Domain(format!(
                        "vortex ({}, {}) of component {} lies outside the domain",
                        p[0],
                        p[1],
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { l, points, domain })
    }

    /// Same vortex list for every component.
    pub fn shared(l: usize, points: Vec<[f64; 2]>, domain: Grid) -> Result<Self> {
        Self::new(l, vec![points; l], domain)
    }

    pub fn vacuum(l: usize, domain: Grid) -> Result<Self> {
        Self::new(l, vec![Vec::new(); l], domain)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.points.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.points.iter().map(Vec::len).sum()
    }

    pub fn with_domain(&self, domain: Grid) -> Result<Self> {
        Self::new(self.l, self.points.clone(), domain)
    }

    pub fn torus(&self) -> Result<&TorusGeometry> {
        self.domain
            .torus()
            .ok_or_else(|| VortexError::WrongDomain("expected a torus spec".into()))
    }

    pub fn plane(&self) -> Result<&PlanarTruncation> {
        self.domain
            .plane()
            .ok_or_else(|| VortexError::WrongDomain("expected a planar spec".into()))
    }

    /// True when every component carries the identical vortex list.
    pub fn is_symmetric(&self) -> bool {
        self.points.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Clone, Debug)]
pub struct BackgroundData {
    pub exp_u0: Vec<ScalarField2D>,
    pub u0_reg: Vec<ScalarField2D>,
    /// Planar source densities `g_j`; `None` on the torus.
    pub g: Option<Vec<ScalarField2D>>,
    /// Regularization scale: `μ` on the plane, `μ₀` on the torus.
    pub mu: f64,
}

/// Value and first two derivatives of a scalar function of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Jet {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    fn variable(v: f64, slope: f64) -> Self {
        Self {
            v,
            d: slope,
            dd: 0.0,
        }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        Self {
            v: r,
            d: -self.d * r * r,
            dd: (2.0 * self.d * self.d * r - self.dd) * r * r,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        Self {
            v: e,
            d: e * self.d,
            dd: e * (self.dd + self.d * self.d),
        }
    }

    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: -self.d,
            dd: -self.dd,
        }
    }
}

/// `exp(-1/s)` for `s > 0`, zero otherwise; flat to all orders at 0.
fn flat_exp(s: Jet) -> Jet {
    if s.v <= 0.0 {
        Jet::constant(0.0)
    } else {
        s.recip().neg().exp()
    }
}

/// C^∞ step equal to 1 for `r <= a` and 0 for `r >= b`, with its
/// first two derivatives in `r`.
pub(crate) fn smooth_step_down(r: f64, a: f64, b: f64) -> Jet {
    if r <= a {
        return Jet::constant(1.0);
    }
    if r >= b {
        return Jet::constant(0.0);
    }
    let t = Jet::variable((r - a) / (b - a), 1.0 / (b - a));
    let one_minus_t = Jet {
        v: 1.0 - t.v,
        d: -t.d,
        dd: 0.0,
    };
    let p = flat_exp(one_minus_t);
    let q = flat_exp(t);
    p.mul(p.add(q).recip())
}

fn warn_close_pairs(points: &[[f64; 2]], min_h: f64, dist: impl Fn([f64; 2], [f64; 2]) -> f64) {
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d = dist(*p, *q);
            if d > 0.0 && d < 2.0 * min_h {
                warn!(
                    "vortices ({}, {}) and ({}, {}) are {:.3e} apart, under two grid cells",
                    p[0], p[1], q[0], q[1], d
                );
            }
        }
    }
}

/// Planar background `u⁰_j = −Σ ln(1 + μ/|x − p|²)` and its source density
/// `g_j = Σ 4μ/(μ + |x − p|²)²`.
pub fn planar_background(spec: &VortexSpec, mu: f64) -> Result<BackgroundData> {
    let plane = *spec.plane()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(VortexError::Domain(format!(
            "regularization scale must be positive, got mu = {mu}"
        )));
    }
    let grid = Grid::Plane(plane);
    let (hx, hy) = grid.spacing();
    let mut exp_u0 = Vec::with_capacity(spec.l);
    let mut u0_reg = Vec::with_capacity(spec.l);
    let mut g = Vec::with_capacity(spec.l);
    for list in &spec.points {
        warn_close_pairs(list, hx.min(hy), |p, q| (p[0] - q[0]).hypot(p[1] - q[1]));
        let rho2 = |x: [f64; 2], p: &[f64; 2]| (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
        exp_u0.push(ScalarField2D::from_fn(grid, |x| {
            list.iter().map(|p| {
                let r2 = rho2(x, p);
                r2 / (r2 + mu)
            })
            .product()
        }));
        u0_reg.push(ScalarField2D::from_fn(grid, |x| {
            -list.iter().map(|p| (rho2(x, p) + mu).ln()).sum::<f64>()
        }));
        g.push(ScalarField2D::from_fn(grid, |x| {
            list.iter()
                .map(|p| 4.0 * mu / (mu + rho2(x, p)).powi(2))
                .sum()
        }));
    }
    Ok(BackgroundData {
        exp_u0,
        u0_reg,
        g: Some(g),
        mu,
    })
}

/// Default torus smoothing length `min(Lx, Ly)/8`, so `μ₀ = (min(Lx, Ly)/8)²`.
pub fn default_smoothing(t: &TorusGeometry) -> f64 {
    t.lx.min(t.ly) / 8.0
}

/// Cutoff radius of the singular profile; strictly inside half the cell.
fn cutoff_radius(t: &TorusGeometry) -> f64 {
    0.45 * t.lx.min(t.ly)
}

/// Periodic background solving `Δu⁰_j = 4πΣδ_p − 4πN_j/|Ω|`, with the
/// zero-mean convention on the smooth remainder.
pub fn periodic_background(spec: &VortexSpec, smoothing: f64) -> Result<BackgroundData> {
    periodic_background_with_offset(spec, smoothing, &vec![0.0; spec.l])
}

/// As [`periodic_background`] with `offsets[j]` added to `u⁰_j`.
pub fn periodic_background_with_offset(
    spec: &VortexSpec,
    smoothing: f64,
    offsets: &[f64],
) -> Result<BackgroundData> {
    let torus = *spec.torus()?;
    if offsets.len() != spec.l {
        return Err(VortexError::Shape {
            expected: spec.l,
            got: offsets.len(),
        });
    }
    let ops = SpectralOps::new(spec.domain);
    let mut exp_u0 = Vec::with_capacity(spec.l);
    let mut u0_reg = Vec::with_capacity(spec.l);
    for (list, &offset) in spec.points.iter().zip(offsets) {
        let (e, r) = periodic_component(&torus, &ops, list, smoothing, offset)?;
        exp_u0.push(e);
        u0_reg.push(r);
    }
    Ok(BackgroundData {
        exp_u0,
        u0_reg,
        g: None,
        mu: smoothing * smoothing,
    })
}

/// Background of a single component; returns `(e^{u⁰}, u⁰_reg)`.
pub(crate) fn periodic_component(
    torus: &TorusGeometry,
    ops: &SpectralOps,
    points: &[[f64; 2]],
    smoothing: f64,
    offset: f64,
) -> Result<(ScalarField2D, ScalarField2D)> {
    let min_h = torus.hx().min(torus.hy());
    if !(smoothing >= 2.0 * min_h) {
        return Err(VortexError::Domain(format!(
            "smoothing {smoothing} is below two grid cells ({})",
            2.0 * min_h
        )));
    }
    let b = cutoff_radius(torus);
    if smoothing >= b {
        return Err(VortexError::Domain(format!(
            "smoothing {smoothing} must stay below the cutoff radius {b}"
        )));
    }
    let mu0 = smoothing * smoothing;
    let grid = Grid::Torus(*torus);
    warn_close_pairs(points, min_h, |p, q| {
        let d = torus.nearest_displacement(p, q);
        d[0].hypot(d[1])
    });

    let n = grid.len();
    let mut source = vec![-4.0 * PI * points.len() as f64 / torus.area(); n];
    let mut reg = vec![0.0; n];
    let mut power = vec![1.0; n];
    for p in points {
        for (idx, x) in grid.nodes().enumerate() {
            let d = torus.nearest_displacement(x, *p);
            let rho2 = d[0] * d[0] + d[1] * d[1];
            let rho = rho2.sqrt();
            let chi = smooth_step_down(rho, 0.0, b);
            if chi.v == 0.0 {
                continue;
            }
            // profile f = ln ρ² − ln(ρ² + μ₀); f' = 2μ₀/(ρ(ρ² + μ₀)); Δf = −4μ₀/(ρ² + μ₀)² off the vortex.
            let lap_f = -4.0 * mu0 / (rho2 + mu0).powi(2);
            let mut sigma = chi.v * lap_f;
            if rho > 0.0 && (chi.d != 0.0 || chi.dd != 0.0) {
                let f = (rho2 / (rho2 + mu0)).ln();
                let df = 2.0 * mu0 / (rho * (rho2 + mu0));
                sigma += 2.0 * chi.d * df + f * (chi.dd + chi.d / rho);
            }
            source[idx] -= sigma;
            reg[idx] -= chi.v * (rho2 + mu0).ln();
            power[idx] *= rho2.powf(chi.v);
        }
    }
    let rhs = ScalarField2D {
        grid,
        values: source,
    };
    // Quadrature leaves a residual mean far below the solution tolerance; project it out.
    let mean = rhs.mean();
    if mean.abs() > 1e-6 * rhs.max_abs().max(1.0) {
        warn!("background source mean {mean:.3e} is large; refine the grid");
    }
    let rhs = rhs.map(|v| v - mean);
    let remainder = torus::poisson_with(ops, &rhs)?;
    let u0_reg = ScalarField2D {
        grid,
        values: remainder
            .values
            .iter()
            .zip(&reg)
            .map(|(r, s)| r + s + offset)
            .collect(),
    };
    let exp_u0 = ScalarField2D {
        grid,
        values: u0_reg
            .values
            .iter()
            .zip(&power)
            .map(|(r, p)| r.exp() * p)
            .collect(),
    };
    Ok((exp_u0, u0_reg))
}

/// Pointwise Laplacian of the periodic singular part away from the vortices,
/// i.e. the analytic `Δs_j` with the delta masses removed.
#[cfg(test)]
fn periodic_singular_laplacian(
    torus: &TorusGeometry,
    points: &[[f64; 2]],
    smoothing: f64,
    x: [f64; 2],
) -> f64 {
    let mu0 = smoothing * smoothing;
    let b = cutoff_radius(torus);
    points
        .iter()
        .map(|p| {
            let d = torus.nearest_displacement(x, *p);
            let rho2 = d[0] * d[0] + d[1] * d[1];
            let rho = rho2.sqrt();
            let chi = smooth_step_down(rho, 0.0, b);
            let mut sigma = chi.v * (-4.0 * mu0 / (rho2 + mu0).powi(2));
            if rho > 0.0 && (chi.d != 0.0 || chi.dd != 0.0) {
                let f = (rho2 / (rho2 + mu0)).ln();
                let df = 2.0 * mu0 / (rho * (rho2 + mu0));
                sigma += 2.0 * chi.d * df + f * (chi.dd + chi.d / rho);
            }
            sigma
        })
        .sum()
}
