use std::f64::consts::PI;

use bps_vortex::background::{default_smoothing, periodic_background_with_offset};
use bps_vortex::diagnostics::{check_flux, check_k_identity, check_uniqueness};
use bps_vortex::problem::{random_start, seeded_rng};
use bps_vortex::{
    Grid, PeriodicProblem, PlanarProblem, PlanarTruncation, ScalarField2D, SolveOptions,
    TorusGeometry, VortexProblem, VortexSpec,
};

fn torus(side: f64, n: usize) -> Grid {
    Grid::Torus(TorusGeometry::new(side, side, n, n).unwrap())
}

fn plane(r: f64, n: usize) -> Grid {
    Grid::Plane(PlanarTruncation::new(r, n, n).unwrap())
}

fn inner(a: &[ScalarField2D], b: &[ScalarField2D]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.grid.cell_area() * x.values.iter().zip(&y.values).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn axpy(a: &[ScalarField2D], t: f64, s: &[ScalarField2D]) -> Vec<ScalarField2D> {
    a.iter()
        .zip(s)
        .map(|(x, y)| ScalarField2D {
            grid: x.grid,
            values: x.values.iter().zip(&y.values).map(|(p, q)| p + t * q).collect(),
        })
        .collect()
}

fn l3_problem() -> PeriodicProblem {
    let side = 4.0 * PI.sqrt();
    let spec = VortexSpec::new(
        3,
        vec![vec![[1.0, 1.0], [4.5, 5.0]], vec![[3.0, 2.0]], vec![]],
        torus(side, 32),
    )
    .unwrap();
    PeriodicProblem::new(spec).unwrap()
}

#[test]
fn energy_at_zero_is_background_mass() {
    let p = l3_problem();
    let e = p.energy(&p.zero_guess()).unwrap();
    let mass: f64 = p.background.exp_u0.iter().map(|f| f.integrate()).sum();
    assert!((e - mass).abs() < 1e-12 * mass);
}

#[test]
fn componentwise_gradient_matches_central_differences() {
    let p = l3_problem();
    let w = random_start(p.spec.domain, 3, &mut seeded_rng(1));
    let g = p.gradient(&w).unwrap();
    let wgt = p.spec.domain.cell_area();
    let eps = 1e-5;
    for (j, k) in [(0usize, 0usize), (1, 517), (2, 1000), (0, 777)] {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[j].values[k] += eps;
        wm[j].values[k] -= eps;
        let fd = (p.energy(&wp).unwrap() - p.energy(&wm).unwrap()) / (2.0 * eps) / wgt;
        let exact = g[j].values[k];
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{j},{k}: {fd} vs {exact}");
    }
}

#[test]
fn strict_convexity_along_segments() {
    let p = l3_problem();
    let mut rng = seeded_rng(2);
    for _ in 0..5 {
        let a = random_start(p.spec.domain, 3, &mut rng);
        let b = random_start(p.spec.domain, 3, &mut rng);
        let mid: Vec<_> = axpy(&a, 1.0, &b).iter().map(|f| f.map(|v| 0.5 * v)).collect();
        let ia = p.energy(&a).unwrap();
        let ib = p.energy(&b).unwrap();
        let im = p.energy(&mid).unwrap();
        assert!(im < 0.5 * (ia + ib), "{im} vs {}", 0.5 * (ia + ib));
    }
}

#[test]
fn hessian_is_symmetric() {
    let p = l3_problem();
    let mut rng = seeded_rng(3);
    let w = random_start(p.spec.domain, 3, &mut rng);
    let s1 = random_start(p.spec.domain, 3, &mut rng);
    let s2 = random_start(p.spec.domain, 3, &mut rng);
    let a = inner(&s1, &p.hessian_vector(&w, &s2).unwrap());
    let b = inner(&s2, &p.hessian_vector(&w, &s1).unwrap());
    assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
}

#[test]
fn vacuum_gradient_vanishes_for_any_area() {
    for side in [1.3, 7.0] {
        let p = PeriodicProblem::new(VortexSpec::vacuum(2, torus(side, 16)).unwrap()).unwrap();
        let g = p.gradient(&p.zero_guess()).unwrap();
        assert!(g.iter().all(|f| f.max_abs() < 1e-13));
    }
}

#[test]
fn converged_torus_solution_properties() {
    let p = l3_problem();
    let r = p.minimize(None, &SolveOptions::default()).unwrap();
    let g = p.gradient(&r.w).unwrap();
    let worst = g.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-8 * 4.0, "max gradient {worst}");
    let area = p.spec.torus().unwrap().area();
    assert!(r.residual <= 1e-8 * 4.0 * area.sqrt());
    let e = r.energy_history();
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
}

#[test]
fn k_identity_three_components() {
    // l=3, N=(2,1,0), |Ω|=16π; K_j = 16π − 4πN_j + π·3
    let side = 4.0 * PI.sqrt();
    let spec = VortexSpec::new(
        3,
        vec![vec![[1.0, 1.0], [4.5, 5.0]], vec![[3.0, 2.0]], vec![]],
        torus(side, 256),
    )
    .unwrap();
    let p = PeriodicProblem::new(spec).unwrap();
    let oracle = [11.0 * PI, 15.0 * PI, 19.0 * PI];
    for (k, o) in p.k.iter().zip(oracle) {
        assert!((k - o).abs() < 1e-12);
    }
    let r = p.minimize(None, &SolveOptions::default()).unwrap();
    let res = check_k_identity(&r, &p).unwrap();
    for (d, k) in res.iter().zip(&p.k) {
        assert!(d.abs() < 1e-3 * k, "{d}");
    }
    let flux = check_flux(&r).unwrap();
    assert!(flux[2].abs() < 1e-3, "empty component flux {}", flux[2]);
}

#[test]
fn background_offset_leaves_u_unchanged() {
    let side = 2.0 * PI;
    let spec = VortexSpec::new(2, vec![vec![[1.0, 2.0]], vec![[4.0, 4.0]]], torus(side, 64)).unwrap();
    let t = *spec.torus().unwrap();
    let a = PeriodicProblem::new(spec.clone()).unwrap();
    let shifted = periodic_background_with_offset(&spec, default_smoothing(&t), &[1.5, -0.7]).unwrap();
    let b = PeriodicProblem::with_background(spec, shifted).unwrap();
    let ra = a.minimize(None, &SolveOptions::default()).unwrap();
    let rb = b.minimize(None, &SolveOptions::default()).unwrap();
    assert!(ra.u_distance(&rb) < 1e-8);
    assert!(ra.v[0].max_abs_diff(&rb.v[0]) > 1.0);
}

#[test]
fn coincident_centres_give_equal_components() {
    let spec = VortexSpec::shared(2, vec![[PI, PI]], torus(2.0 * PI, 64)).unwrap();
    let r = PeriodicProblem::new(spec).unwrap().minimize(None, &SolveOptions::default()).unwrap();
    assert!(r.component_spread() < 1e-10);
}

#[test]
fn planar_minimum_is_below_zero_and_gradient_matches_differences() {
    let spec = VortexSpec::new(2, vec![vec![[0.5, 0.0]], vec![[-1.0, 0.5]]], plane(10.0, 64)).unwrap();
    let p = PlanarProblem::new(spec).unwrap();
    let mut rng = seeded_rng(4);
    let w = random_start(p.grid(), 2, &mut rng);
    let s = random_start(p.grid(), 2, &mut rng);
    let eps = 1e-5;
    let fd = (p.energy(&axpy(&w, eps, &s)).unwrap() - p.energy(&axpy(&w, -eps, &s)).unwrap()) / (2.0 * eps);
    let exact = inner(&p.gradient(&w).unwrap(), &s);
    assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "{fd} vs {exact}");

    let r = p.minimize(None, &SolveOptions::default()).unwrap();
    assert!(p.energy(&r.w).unwrap() <= 0.0);
}

#[test]
fn planar_boundary_values_approach_vacuum() {
    let spec = VortexSpec::new(2, vec![vec![[0.0, 0.0]], vec![]], plane(15.0, 256)).unwrap();
    let r = PlanarProblem::new(spec).unwrap().minimize(None, &SolveOptions::default()).unwrap();
    let (cols, rows) = r.grid.shape();
    for e in &r.exp_u {
        for k in 0..cols {
            for idx in [k, (rows - 1) * cols + k, k * cols, k * cols + cols - 1] {
                assert!((e.values[idx] - 1.0).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn planar_truncation_consistency_15_to_20() {
    // equal spacing: 192 intervals on [-15, 15], 256 on [-20, 20]
    let solve = |r: f64, n: usize| {
        let spec = VortexSpec::new(2, vec![vec![[0.0, 0.0]], vec![]], plane(r, n)).unwrap();
        PlanarProblem::new(spec).unwrap().minimize(None, &SolveOptions::default()).unwrap()
    };
    let a = solve(15.0, 192);
    let b = solve(20.0, 256);
    let (ca, _) = a.grid.shape();
    let (cb, _) = b.grid.shape();
    let off = 32;
    let mut worst = 0.0f64;
    for (ea, eb) in a.exp_u.iter().zip(&b.exp_u) {
        for j in 0..ca {
            for i in 0..ca {
                let (x, y) = (ea.values[j * ca + i], eb.values[(j + off) * cb + i + off]);
                if x > 0.0 {
                    worst = worst.max((x.ln() - y.ln()).abs());
                }
            }
        }
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn planar_multistart_agrees() {
    let spec = VortexSpec::new(2, vec![vec![[0.0, 0.0]], vec![]], plane(12.0, 128)).unwrap();
    let p = VortexProblem::new(spec).unwrap();
    let d = check_uniqueness(&p, 2, 9, &SolveOptions::default()).unwrap();
    assert!(d < 1e-6, "{d}");
}
