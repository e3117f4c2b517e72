use std::f64::consts::PI;

use bps_vortex::problem::{random_field, seeded_rng};
use bps_vortex::torus;
use bps_vortex::{Grid, ScalarField2D, TorusGeometry};

fn grid(lx: f64, ly: f64, n: usize) -> Grid {
    Grid::Torus(TorusGeometry::new(lx, ly, n, n).unwrap())
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn integrate_constant_and_sine() {
    let g = grid(3.0, 5.0, 32);
    assert!((torus::integrate(&ScalarField2D::constant(g, 1.0)) - 15.0).abs() < 1e-12);
    let s = ScalarField2D::from_fn(g, |x| (2.0 * PI * x[0] / 3.0).sin());
    assert!(torus::integrate(&s).abs() < 1e-12);
}

#[test]
fn integrate_periodized_gaussian_against_adaptive_quadrature() {
    let (lx, ly) = (2.0 * PI, 5.0);
    let bump = |x: f64, c: f64, s: f64, len: f64| -> f64 {
        (-3..=3).map(|k| (-((x - c + k as f64 * len) / s).powi(2)).exp()).sum()
    };
    let fx = |x: f64| bump(x, 2.0, 0.6, lx);
    let fy = |y: f64| bump(y, 1.0, 0.8, ly);
    let g = grid(lx, ly, 256);
    let field = ScalarField2D::from_fn(g, |p| fx(p[0]) * fy(p[1]));
    // 2-D oracle as an iterated adaptive rule
    let oracle = simpson(&|y| fy(y) * simpson(&fx, 0.0, lx, 1e-13), 0.0, ly, 1e-12);
    let got = torus::integrate(&field);
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn laplacian_of_constant_and_eigenfunction() {
    let g = grid(2.5, 4.0, 64);
    let lap = torus::laplacian(&ScalarField2D::constant(g, 3.3)).unwrap();
    assert!(lap.max_abs() < 1e-12);
    let k = 2.0 * PI / 2.5;
    let f = ScalarField2D::from_fn(g, |x| (k * x[0]).cos());
    let lap = torus::laplacian(&f).unwrap();
    assert!(lap.max_abs_diff(&f.map(|v| -k * k * v)) < 1e-10);
}

/// Five-point Laplacian on the periodic grid.
fn five_point(f: &ScalarField2D, t: &TorusGeometry) -> Vec<f64> {
    let (nx, ny) = (t.nx, t.ny);
    let (hx, hy) = (t.hx(), t.hy());
    let at = |i: usize, j: usize| f.values[(j % ny) * nx + (i % nx)];
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let c = at(i, j);
            out[j * nx + i] = (at(i + 1, j) - 2.0 * c + at(i + nx - 1, j)) / (hx * hx)
                + (at(i, j + 1) - 2.0 * c + at(i, j + ny - 1)) / (hy * hy);
        }
    }
    out
}

#[test]
fn spectral_laplacian_agrees_with_five_point_at_second_order() {
    let (lx, ly) = (2.0 * PI, 3.0);
    // band-limited test function from a fixed draw
    let coarse = grid(lx, ly, 16);
    let seed_field = random_field(coarse, &mut seeded_rng(11));
    let eval = |t: &TorusGeometry| -> ScalarField2D {
        let ops = bps_vortex::spectral::SpectralOps::new(coarse);
        ScalarField2D {
            grid: Grid::Torus(*t),
            values: ops.fourier_interpolate(&seed_field.values, Grid::Torus(*t)),
        }
    };
    let mut errs = Vec::new();
    for n in [32usize, 64, 128, 256] {
        let t = TorusGeometry::new(lx, ly, n, n).unwrap();
        let f = eval(&t);
        let spectral = torus::laplacian(&f).unwrap();
        let fd = five_point(&f, &t);
        let err = spectral
            .values
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        errs.push(err);
    }
    for pair in errs.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order >= 1.9, "order {order} from {errs:?}");
    }
}

#[test]
fn divergence_theorem_and_poisson_round_trip() {
    let g = grid(2.0 * PI, 2.0 * PI, 64);
    let f = random_field(g, &mut seeded_rng(5)).map(|v| (v * 2.0).exp());
    let lap = torus::laplacian(&f).unwrap();
    assert!(torus::integrate(&lap).abs() < 1e-9 * torus::integrate(&lap.map(f64::abs)));

    let r = random_field(g, &mut seeded_rng(6));
    let r = r.map(|v| v - r.mean());
    let sol = torus::poisson_solve_zero_mean(&r).unwrap();
    let back = torus::laplacian(&sol).unwrap();
    assert!(back.max_abs_diff(&r) < 1e-9 * r.max_abs());

    let back = torus::poisson_solve_zero_mean(&lap).unwrap();
    let centred = f.map(|v| v - f.mean());
    assert!(back.max_abs_diff(&centred) < 1e-9 * f.max_abs());
}

#[test]
fn poisson_examples() {
    let g = grid(2.0, 2.0, 32);
    let zero = torus::poisson_solve_zero_mean(&ScalarField2D::zeros(g)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    let k = PI;
    let c = ScalarField2D::from_fn(g, |x| (k * x[0]).cos());
    let sol = torus::poisson_solve_zero_mean(&c.map(|v| -k * k * v)).unwrap();
    assert!(sol.max_abs_diff(&c) < 1e-10);
    assert!(torus::poisson_solve_zero_mean(&ScalarField2D::constant(g, 1.0)).is_err());
}
