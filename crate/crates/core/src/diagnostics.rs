//! Physical fields and the quantized identities a solution must satisfy.
//!
//! `|q_j| = e^{u_j/2}` and `F_j = (l+1) − e^{u_j} − Σ_i e^{u_i}` are read off
//! algebraically from `e^u`. The flux `∫F_j` should equal `4πN_j` on either
//! domain, and on the torus `∫e^{u_j}` should equal `K_j`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::VortexSpec;
use crate::error::{Result, VortexError};
use crate::functional::{SolveOptions, SolveResult};
use crate::grid::{Grid, ScalarField2D};
use crate::newton::{self, ConvexObjective, NewtonOptions};
use crate::periodic::PeriodicProblem;
use crate::planar::DecayFit;
use crate::problem::{random_start, seeded_rng, VortexProblem};
use crate::radial::radial_profile;
use crate::spectral::SpectralOps;

/// Pass thresholds, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative flux error, measured against `4π·max(N_j, 1)`.
    pub flux_rel: f64,
    /// Relative error of `∫e^{u_j}` against `K_j`.
    pub k_rel: f64,
    /// `L²` norm of the strong-form residual.
    pub residual: f64,
    /// Max-norm spread of multi-start solutions.
    pub multistart: f64,
    /// Max-norm spread between components of a symmetric solution.
    pub symmetric: f64,
    /// Max-norm gap between a symmetric solution and the scalar reference.
    pub oracle: f64,
    /// Accepted range of the `Σu²` decay rate.
    pub decay_range: [f64; 2],
    /// Allowed gap between the gradient and field decay rates.
    pub decay_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flux_rel: 5e-3,
            k_rel: 1e-3,
            residual: 1e-8,
            multistart: 1e-6,
            symmetric: 1e-10,
            oracle: 1e-3,
            decay_range: [0.8, 1.1],
            decay_gap: 0.15,
        }
    }
}

impl Tolerances {
    /// Defaults with the looser planar flux bound where it applies.
    pub fn for_grid(grid: &Grid) -> Self {
        match grid {
            Grid::Torus(_) => Self::default(),
            Grid::Plane(_) => Self {
                flux_rel: 1e-2,
                ..Self::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhysicalFields {
    /// `|q_j| = e^{u_j/2}`.
    pub q_abs: Vec<ScalarField2D>,
    /// `F_j = (l+1) − e^{u_j} − Σ_i e^{u_i}`.
    pub f: Vec<ScalarField2D>,
}

fn require_converged(result: &SolveResult) -> Result<()> {
    if result.converged {
        Ok(())
    } else {
        Err(VortexError::NotConverged)
    }
}

/// `F_j` pointwise from the `e^{u_i}`.
fn field_strengths(exp_u: &[ScalarField2D]) -> Vec<ScalarField2D> {
    let grid = exp_u[0].grid;
    let lp1 = (exp_u.len() + 1) as f64;
    let total: Vec<f64> = (0..grid.len())
        .map(|k| exp_u.iter().map(|f| f.values[k]).sum())
        .collect();
    exp_u
        .iter()
        .map(|e| ScalarField2D {
            grid,
            values: e.values.iter().zip(&total).map(|(x, t)| lp1 - x - t).collect(),
        })
        .collect()
}

pub fn reconstruct_fields(result: &SolveResult) -> Result<PhysicalFields> {
    require_converged(result)?;
    Ok(PhysicalFields {
        q_abs: result.exp_u.iter().map(|e| e.map(f64::sqrt)).collect(),
        f: field_strengths(&result.exp_u),
    })
}

/// `∫F_j` for every component.
pub fn check_flux(result: &SolveResult) -> Result<Vec<f64>> {
    require_converged(result)?;
    Ok(field_strengths(&result.exp_u).iter().map(|f| f.integrate()).collect())
}

pub fn flux_expected(counts: &[usize]) -> Vec<f64> {
    counts.iter().map(|&n| 4.0 * PI * n as f64).collect()
}

/// `|∫F_j − 4πN_j| / (4π·max(N_j, 1))`.
pub fn relative_flux_errors(flux: &[f64], counts: &[usize]) -> Vec<f64> {
    flux.iter()
        .zip(counts)
        .map(|(f, &n)| (f - 4.0 * PI * n as f64).abs() / (4.0 * PI * n.max(1) as f64))
        .collect()
}

/// `∫e^{u⁰_j + v_j} − K_j` on the torus.
pub fn check_k_identity(result: &SolveResult, problem: &PeriodicProblem) -> Result<Vec<f64>> {
    if result.grid.torus().is_none() {
        return Err(VortexError::WrongDomain(
            "the K identity holds on the doubly periodic cell only".into(),
        ));
    }
    require_converged(result)?;
    Ok(result
        .exp_u
        .iter()
        .zip(&problem.k)
        .map(|(e, k)| e.integrate() - k)
        .collect())
}

/// Flux error of a torus solution measured off its own grid.
///
/// On the solver grid the flux identity holds to rounding whatever the
/// resolution, because it is the discrete zero mode of the equation. Here the
/// solution `w` is Fourier-interpolated to a grid `factor` times finer, the
/// background is rebuilt there, and `∫F_j − 4πN_j` is evaluated on the fine
/// grid, so the result reflects the discretization error of `w`.
pub fn refined_flux_error(problem: &PeriodicProblem, result: &SolveResult, factor: usize) -> Result<Vec<f64>> {
    let Grid::Torus(coarse) = result.grid else {
        return Err(VortexError::WrongDomain("refined flux needs a torus result".into()));
    };
    require_converged(result)?;
    if factor < 2 {
        return Err(VortexError::Domain(format!("refinement factor must be >= 2, got {factor}")));
    }
    let fine = Grid::Torus(coarse.with_resolution(factor * coarse.nx, factor * coarse.ny)?);
    let fine_problem = PeriodicProblem::new(problem.spec.with_domain(fine)?)?;
    let ops = SpectralOps::new(result.grid);
    let w: Vec<ScalarField2D> = result
        .w
        .iter()
        .map(|f| ScalarField2D {
            grid: fine,
            values: ops.fourier_interpolate(&f.values, fine),
        })
        .collect();
    let exp_u = fine_problem.exp_u(&w)?;
    let flux: Vec<f64> = field_strengths(&exp_u).iter().map(|f| f.integrate()).collect();
    Ok(flux
        .iter()
        .zip(flux_expected(&result.counts))
        .map(|(f, e)| f - e)
        .collect())
}

/// Solves from `trials` random starts and returns the largest pairwise
/// max-norm distance between the resulting `u`.
pub fn check_uniqueness(
    problem: &VortexProblem,
    trials: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<f64> {
    if trials < 2 {
        return Err(VortexError::Domain(format!("need at least 2 trials, got {trials}")));
    }
    let mut rng = seeded_rng(seed);
    let starts: Vec<_> = (0..trials)
        .map(|_| random_start(problem.grid(), problem.l(), &mut rng))
        .collect();
    // independent solves, run concurrently
    let results = starts
        .par_iter()
        .map(|w0| problem.minimize(Some(w0), opts))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..trials {
        for j in i + 1..trials {
            worst = worst.max(results[i].u_distance(&results[j]));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetricReduction {
    /// `max_{i,j} max|u_i − u_j|`.
    pub spread: f64,
    /// Max-norm gap between the common component and the scalar reference,
    /// `None` when no reference applies.
    pub oracle_delta: Option<f64>,
    /// Radius up to which the planar comparison was made.
    pub compared_to: Option<f64>,
}

/// Scalar functional `∫ ½|∇v|² + (l+1)e^{u⁰+v} − a v` of the symmetric torus problem.
struct SymmetricScalar {
    ops: SpectralOps,
    exp_u0: Vec<f64>,
    lp1: f64,
    a: f64,
}

impl ConvexObjective for SymmetricScalar {
    fn dim(&self) -> usize {
        self.exp_u0.len()
    }

    fn weight(&self) -> f64 {
        self.ops.grid().cell_area()
    }

    fn energy(&self, v: &[f64]) -> Result<f64> {
        let bulk: f64 = v
            .iter()
            .zip(&self.exp_u0)
            .map(|(v, e)| self.lp1 * e * v.exp() - self.a * v)
            .sum();
        Ok(self.ops.dirichlet_energy(v) + self.weight() * bulk)
    }

    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        let lap = self.ops.laplacian(v);
        Ok(v.iter()
            .zip(&self.exp_u0)
            .zip(&lap)
            .map(|((v, e), d)| -d + self.lp1 * e * v.exp() - self.a)
            .collect())
    }

    fn curvature(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.iter().zip(&self.exp_u0).map(|(v, e)| self.lp1 * e * v.exp()).collect())
    }

    fn apply_hessian(&self, k: &[f64], s: &[f64]) -> Vec<f64> {
        let lap = self.ops.laplacian(s);
        s.iter().zip(k).zip(&lap).map(|((s, k), d)| k * s - d).collect()
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        self.ops.shifted_inverse(r, self.lp1)
    }
}

/// Largest radius used when comparing with the radial reference.
const ORACLE_RADIUS: f64 = 8.0;

/// Solves a problem whose components share one vortex list, measures how far
/// the components differ and compares the common profile with an
/// independent scalar computation.
///
/// On the torus the reference is a Newton solve of the scalar equation
/// `Δu = (l+1)(e^u − 1) + 4πΣδ`; on the plane, when every vortex sits at one
/// point, it is the radial shooting profile.
pub fn check_symmetric_reduction(spec: &VortexSpec, opts: &SolveOptions) -> Result<SymmetricReduction> {
    if !spec.is_symmetric() {
        return Err(VortexError::Domain(
            "symmetric reduction needs every component to share one vortex list".into(),
        ));
    }
    if spec.total() == 0 {
        return Ok(SymmetricReduction {
            spread: 0.0,
            oracle_delta: Some(0.0),
            compared_to: None,
        });
    }
    let problem = VortexProblem::new(spec.clone())?;
    let result = problem.minimize(None, opts)?;
    let spread = result.component_spread();
    let (oracle_delta, compared_to) = match &problem {
        VortexProblem::Periodic(p) => {
            let scalar = SymmetricScalar {
                ops: SpectralOps::new(spec.domain),
                exp_u0: p.background.exp_u0[0].values.clone(),
                lp1: (spec.l + 1) as f64,
                a: p.a[0],
            };
            let nopts = NewtonOptions {
                tol: opts.tol,
                max_outer: opts.max_outer,
                ..Default::default()
            };
            let out = newton::minimize(&scalar, vec![0.0; scalar.dim()], &nopts)?;
            if !out.converged {
                return Err(VortexError::NotConverged);
            }
            let delta = result.v[0]
                .values
                .iter()
                .zip(&out.w)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (Some(delta), None)
        }
        VortexProblem::Planar(p) => {
            let list = &spec.points[0];
            let centre = list[0];
            if list.iter().any(|q| *q != centre) {
                (None, None)
            } else {
                let profile = radial_profile(spec.l, list.len(), p.taper.inner)?;
                let reach = profile.r_valid.min(ORACLE_RADIUS);
                let u = &result.u()[0];
                let mut delta = 0.0f64;
                for (x, val) in result.grid.nodes().zip(&u.values) {
                    let r = (x[0] - centre[0]).hypot(x[1] - centre[1]);
                    if r == 0.0 || r > reach {
                        continue;
                    }
                    if let Some(reference) = profile.eval(r) {
                        delta = delta.max((val - reference).abs());
                    }
                }
                (Some(delta), Some(reach))
            }
        }
    };
    Ok(SymmetricReduction {
        spread,
        oracle_delta,
        compared_to,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub flux: Vec<f64>,
    pub flux_expected: Vec<f64>,
    #[serde(rename = "K_residuals")]
    pub k_residuals: Option<Vec<f64>>,
    /// `L²` norms of the strong-form residual per component.
    pub residuals: Vec<f64>,
    pub decay: Option<DecayFit>,
    pub multistart_delta: Option<f64>,
    pub symmetric_delta: Option<f64>,
    pub tolerances: Tolerances,
    /// `K_j`, used to scale the pass flag only.
    #[serde(skip)]
    pub k_values: Option<Vec<f64>>,
    #[serde(skip)]
    pub symmetric_oracle_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl DiagnosticsReport {
    /// Report with flux and residual entries filled from `result`.
    pub fn from_result(result: &SolveResult, tolerances: Tolerances) -> Result<Self> {
        Ok(Self {
            flux: check_flux(result)?,
            flux_expected: flux_expected(&result.counts),
            k_residuals: None,
            residuals: result.residual_components.clone(),
            decay: None,
            multistart_delta: None,
            symmetric_delta: None,
            tolerances,
            k_values: None,
            symmetric_oracle_delta: None,
        })
    }

    pub fn with_k_identity(mut self, result: &SolveResult, problem: &PeriodicProblem) -> Result<Self> {
        self.k_residuals = Some(check_k_identity(result, problem)?);
        self.k_values = Some(problem.k.clone());
        Ok(self)
    }

    /// Every enabled check against its tolerance.
    pub fn checks(&self) -> Vec<CheckOutcome> {
        let t = &self.tolerances;
        let mut out = Vec::new();
        let mut push = |name, value: f64, limit: f64| {
            out.push(CheckOutcome {
                name,
                value,
                limit,
                pass: value <= limit,
            })
        };
        let worst = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let residual = self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
        push("residual", residual, t.residual);
        let counts: Vec<usize> = self
            .flux_expected
            .iter()
            .map(|e| (e / (4.0 * PI)).round() as usize)
            .collect();
        push("flux", worst(&relative_flux_errors(&self.flux, &counts)), t.flux_rel);
        if let (Some(res), Some(k)) = (&self.k_residuals, &self.k_values) {
            let rel: Vec<f64> = res.iter().zip(k).map(|(r, k)| r / k).collect();
            push("K_identity", worst(&rel), t.k_rel);
        }
        if let Some(fit) = &self.decay {
            let [lo, hi] = t.decay_range;
            // distance outside the accepted range, zero inside it
            let outside = (lo - fit.rate).max(fit.rate - hi).max(0.0);
            push("decay_rate", outside, 0.0);
            push("decay_gap", (fit.grad_rate - fit.rate).abs(), t.decay_gap);
        }
        if let Some(d) = self.multistart_delta {
            push("multistart", d, t.multistart);
        }
        if let Some(d) = self.symmetric_delta {
            push("symmetric", d, t.symmetric);
        }
        if let Some(d) = self.symmetric_oracle_delta {
            push("symmetric_oracle", d, t.oracle);
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PlanarTruncation, TorusGeometry};

    fn torus(n: usize) -> Grid {
        Grid::Torus(TorusGeometry::new(2.0 * PI, 2.0 * PI, n, n).unwrap())
    }

    fn solve(spec: VortexSpec) -> (VortexProblem, SolveResult) {
        let p = VortexProblem::new(spec).unwrap();
        let r = p.minimize(None, &SolveOptions::default()).unwrap();
        (p, r)
    }

    #[test]
    fn vacuum_fields() {
        let (_, r) = solve(VortexSpec::vacuum(2, torus(16)).unwrap());
        let f = reconstruct_fields(&r).unwrap();
        assert!(f.q_abs.iter().all(|q| q.values.iter().all(|v| *v == 1.0)));
        assert!(f.f.iter().all(|q| q.max_abs() == 0.0));
        assert_eq!(check_flux(&r).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn refuses_unconverged() {
        let (_, mut r) = solve(VortexSpec::vacuum(2, torus(16)).unwrap());
        r.converged = false;
        assert!(matches!(reconstruct_fields(&r), Err(VortexError::NotConverged)));
        assert!(check_flux(&r).is_err());
    }

    #[test]
    fn vortex_core_and_field_bounds() {
        let spec = VortexSpec::new(2, vec![vec![[PI, PI]], vec![[1.0, 1.0]]], torus(64)).unwrap();
        let (_, r) = solve(spec);
        let f = reconstruct_fields(&r).unwrap();
        let centre = 32 * 64 + 32;
        assert_eq!(f.q_abs[0].values[centre], 0.0);
        let expected = 3.0 - r.exp_u[1].values[centre];
        assert!((f.f[0].values[centre] - expected).abs() < 1e-14);
        assert!(f.f[0].values[centre] > 0.0);
        assert!(f.f.iter().all(|c| c.values.iter().all(|v| *v <= 3.0)));
    }

    #[test]
    fn k_identity_wrong_domain() {
        let plane = Grid::Plane(PlanarTruncation::new(8.0, 32, 32).unwrap());
        let (_, r) = solve(VortexSpec::vacuum(2, plane).unwrap());
        let tp = PeriodicProblem::new(VortexSpec::vacuum(2, torus(16)).unwrap()).unwrap();
        assert!(matches!(check_k_identity(&r, &tp), Err(VortexError::WrongDomain(_))));
    }

    #[test]
    fn vacuum_k_identity_is_area() {
        let (p, r) = solve(VortexSpec::vacuum(2, torus(16)).unwrap());
        let VortexProblem::Periodic(p) = p else { unreachable!() };
        let res = check_k_identity(&r, &p).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vacuum_uniqueness() {
        let p = VortexProblem::new(VortexSpec::vacuum(2, torus(16)).unwrap()).unwrap();
        let d = check_uniqueness(&p, 2, 3, &SolveOptions::default()).unwrap();
        assert!(d < 1e-12, "{d}");
        assert!(check_uniqueness(&p, 1, 3, &SolveOptions::default()).is_err());
    }

    #[test]
    fn symmetric_torus_pair() {
        let spec = VortexSpec::shared(2, vec![[2.0, 3.0]], torus(64)).unwrap();
        let s = check_symmetric_reduction(&spec, &SolveOptions::default()).unwrap();
        assert!(s.spread < 1e-10, "{}", s.spread);
        assert!(s.oracle_delta.unwrap() < 1e-8, "{:?}", s.oracle_delta);
        let vac = VortexSpec::vacuum(3, torus(16)).unwrap();
        assert_eq!(check_symmetric_reduction(&vac, &SolveOptions::default()).unwrap().spread, 0.0);
    }

    #[test]
    fn asymmetric_rejected() {
        let spec = VortexSpec::new(2, vec![vec![[1.0, 1.0]], vec![]], torus(16)).unwrap();
        assert!(check_symmetric_reduction(&spec, &SolveOptions::default()).is_err());
    }

    #[test]
    fn report_json_keys() {
        let (p, r) = solve(VortexSpec::vacuum(2, torus(16)).unwrap());
        let VortexProblem::Periodic(p) = p else { unreachable!() };
        let rep = DiagnosticsReport::from_result(&r, Tolerances::default())
            .unwrap()
            .with_k_identity(&r, &p)
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "K_residuals",
                "decay",
                "flux",
                "flux_expected",
                "multistart_delta",
                "residuals",
                "symmetric_delta",
                "tolerances"
            ]
        );
        assert!(rep.all_pass());
    }
}
