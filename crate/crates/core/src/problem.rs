//! Domain-independent front door over the periodic and planar problems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::background::VortexSpec;
use crate::error::Result;
use crate::functional::{SolveOptions, SolveResult};
use crate::grid::{Grid, ScalarField2D};
use crate::periodic::PeriodicProblem;
use crate::planar::PlanarProblem;

#[derive(Clone, Debug)]
pub enum VortexProblem {
    Periodic(PeriodicProblem),
    Planar(PlanarProblem),
}

impl VortexProblem {
    pub fn new(spec: VortexSpec) -> Result<Self> {
        Ok(match spec.domain {
            Grid::Torus(_) => Self::Periodic(PeriodicProblem::new(spec)?),
            Grid::Plane(_) => Self::Planar(PlanarProblem::new(spec)?),
        })
    }

    pub fn spec(&self) -> &VortexSpec {
        match self {
            Self::Periodic(p) => &p.spec,
            Self::Planar(p) => &p.spec,
        }
    }

    pub fn l(&self) -> usize {
        self.spec().l
    }

    pub fn grid(&self) -> Grid {
        self.spec().domain
    }

    pub fn minimize(&self, w0: Option<&[ScalarField2D]>, opts: &SolveOptions) -> Result<SolveResult> {
        match self {
            Self::Periodic(p) => p.minimize(w0, opts),
            Self::Planar(p) => p.minimize(w0, opts),
        }
    }
}

/// Number of modes per direction in random initial fields.
const RANDOM_MODES: usize = 4;

/// Smooth random field of max amplitude 1 built from low Fourier modes on the
/// torus or low sine modes on the box, with standard normal coefficients.
pub fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField2D {
    let m = RANDOM_MODES;
    let coeffs: Vec<f64> = (0..4 * m * m).map(|_| StandardNormal.sample(rng)).collect();
    let f = match grid {
        Grid::Torus(t) => ScalarField2D::from_fn(grid, |x| {
            let (ax, ay) = (
                2.0 * std::f64::consts::PI * x[0] / t.lx,
                2.0 * std::f64::consts::PI * x[1] / t.ly,
            );
            let mut s = 0.0;
            for kx in 0..m {
                for ky in 0..m {
                    let c = &coeffs[4 * (kx * m + ky)..];
                    let (px, py) = (kx as f64 * ax, ky as f64 * ay);
                    s += c[0] * px.cos() * py.cos()
                        + c[1] * px.cos() * py.sin()
                        + c[2] * px.sin() * py.cos()
                        + c[3] * px.sin() * py.sin();
                }
            }
            s
        }),
        Grid::Plane(p) => ScalarField2D::from_fn(grid, |x| {
            let k = std::f64::consts::PI / (2.0 * p.half_width);
            let (ax, ay) = (k * (x[0] + p.half_width), k * (x[1] + p.half_width));
            let mut s = 0.0;
            for kx in 0..m {
                for ky in 0..m {
                    s += coeffs[kx * m + ky]
                        * ((kx + 1) as f64 * ax).sin()
                        * ((ky + 1) as f64 * ay).sin();
                }
            }
            s
        }),
    };
    let peak = f.max_abs();
    if peak > 0.0 {
        f.map(|v| v / peak)
    } else {
        f
    }
}

/// `l` independent random fields from a seeded stream.
pub fn random_start(grid: Grid, l: usize, rng: &mut ChaCha8Rng) -> Vec<ScalarField2D> {
    (0..l).map(|_| random_field(grid, rng)).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PlanarTruncation, TorusGeometry};

    #[test]
    fn random_fields_are_normalized_and_reproducible() {
        let g = Grid::Torus(TorusGeometry::new(3.0, 2.0, 16, 16).unwrap());
        let a = random_field(g, &mut seeded_rng(7));
        let b = random_field(g, &mut seeded_rng(7));
        assert_eq!(a, b);
        assert!((a.max_abs() - 1.0).abs() < 1e-15);
        let c = random_field(g, &mut seeded_rng(8));
        assert!(a.max_abs_diff(&c) > 1e-3);
    }

    #[test]
    fn planar_random_field_fits_box() {
        let g = Grid::Plane(PlanarTruncation::new(5.0, 32, 32).unwrap());
        let f = random_field(g, &mut seeded_rng(1));
        assert!((f.max_abs() - 1.0).abs() < 1e-15);
        assert!(f.values[0].abs() < 0.2);
    }

    #[test]
    fn dispatches_on_domain() {
        let g = Grid::Plane(PlanarTruncation::new(8.0, 32, 32).unwrap());
        let p = VortexProblem::new(VortexSpec::vacuum(2, g).unwrap()).unwrap();
        assert!(matches!(p, VortexProblem::Planar(_)));
        assert_eq!(p.l(), 2);
    }
}
