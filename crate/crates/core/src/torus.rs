//! Field-level operators on the doubly periodic cell.

use crate::error::{Result, VortexError};
use crate::grid::{Grid, ScalarField2D};
use crate::spectral::SpectralOps;

/// Relative size of the mean a right-hand side may carry and still count as solvable.
pub const SOLVABILITY_TOL: f64 = 1e-10;

fn torus_ops(f: &ScalarField2D) -> Result<SpectralOps> {
    match f.grid {
        Grid::Torus(_) => Ok(SpectralOps::new(f.grid)),
        Grid::Plane(_) => Err(VortexError::WrongDomain(
            "periodic operator applied to a planar field".into(),
        )),
    }
}

pub fn integrate(f: &ScalarField2D) -> f64 {
    f.integrate()
}

/// Spectral Laplacian with physical wavenumbers `2πm/L`.
pub fn laplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    let ops = torus_ops(f)?;
    Ok(ScalarField2D {
        grid: f.grid,
        values: ops.laplacian(&f.values),
    })
}

/// The zero-mean solution of `Δu = rhs`.
pub fn poisson_solve_zero_mean(rhs: &ScalarField2D) -> Result<ScalarField2D> {
    let ops = torus_ops(rhs)?;
    poisson_with(&ops, rhs)
}

pub(crate) fn poisson_with(ops: &SpectralOps, rhs: &ScalarField2D) -> Result<ScalarField2D> {
    let mean = rhs.mean();
    let max_abs = rhs.max_abs();
    if mean.abs() > SOLVABILITY_TOL * max_abs {
        return Err(VortexError::Solvability { mean, max_abs });
    }
    Ok(ScalarField2D {
        grid: rhs.grid,
        values: ops.inverse_laplacian(&rhs.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGeometry;
    use std::f64::consts::PI;

    fn grid(n: usize) -> (TorusGeometry, Grid) {
        let t = TorusGeometry::new(3.0, 2.0, n, n).unwrap();
        (t, Grid::Torus(t))
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let (_, g) = grid(16);
        let lap = laplacian(&ScalarField2D::constant(g, 4.2)).unwrap();
        assert!(lap.max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let (t, g) = grid(32);
        let k = 2.0 * PI / t.lx;
        let f = ScalarField2D::from_fn(g, |[x, _]| (k * x).cos());
        let lap = laplacian(&f).unwrap();
        for (a, b) in lap.values.iter().zip(&f.values) {
            assert!((a + k * k * b).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_eigenfunction_and_zero() {
        let (t, g) = grid(32);
        let k = 2.0 * PI / t.lx;
        let rhs = ScalarField2D::from_fn(g, |[x, _]| -k * k * (k * x).cos());
        let u = poisson_solve_zero_mean(&rhs).unwrap();
        for (node, v) in g.nodes().zip(&u.values) {
            assert!((v - (k * node[0]).cos()).abs() < 1e-10);
        }
        let zero = poisson_solve_zero_mean(&ScalarField2D::zeros(g)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let (_, g) = grid(16);
        let rhs = ScalarField2D::from_fn(g, |[x, _]| 1.0 + x.sin());
        match poisson_solve_zero_mean(&rhs) {
            Err(VortexError::Solvability { mean, .. }) => assert!(mean > 0.5),
            other => panic!("expected solvability error, got {other:?}"),
        }
    }

    #[test]
    fn imaginary_residue_is_negligible() {
        let (t, g) = grid(64);
        let f = ScalarField2D::from_fn(g, |[x, y]| {
            (2.0 * PI * x / t.lx).sin() * (4.0 * PI * y / t.ly).cos() + (-(x - 1.0).powi(2)).exp()
        });
        let ops = SpectralOps::new(g);
        let (_, rel) = ops.apply_multiplier_checked(&f.values, |k2| -k2);
        assert!(rel < 1e-10);
    }

    #[test]
    fn planar_field_is_wrong_domain() {
        let p = crate::grid::PlanarTruncation::new(2.0, 16, 16).unwrap();
        let f = ScalarField2D::zeros(Grid::Plane(p));
        assert!(matches!(laplacian(&f), Err(VortexError::WrongDomain(_))));
    }
}
