//! Vortices on the doubly periodic cell: existence gate, the convex
//! functional in the Cholesky variables `w = L⁻¹v`, and its minimization.

use std::f64::consts::PI;

use serde::Serialize;

use crate::background::{default_smoothing, periodic_background, BackgroundData, VortexSpec};
use crate::coupling::CouplingData;
use crate::error::{Result, VortexError};
use crate::functional::{assemble_result, CoupledExp, SolveOptions, SolveResult};
use crate::grid::ScalarField2D;
use crate::newton::{self, ConvexObjective, NewtonOptions};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExistenceReport {
    /// True iff every `K_j > 0`; integrating the system shows this is necessary,
    /// and it is what makes the functional coercive.
    pub admissible: bool,
    /// `(l+1)|Ω|/(4π)`.
    pub threshold: f64,
    /// `threshold − N_j`.
    pub margins: Vec<f64>,
    /// `K_j = |Ω| − 4πN_j + 4π/(l+1)·ΣN_i`, the forced value of `∫e^{u_j}`.
    pub k: Vec<f64>,
    /// `max N_j < threshold`.
    pub threshold_condition: bool,
}

impl ExistenceReport {
    pub fn criteria_agree(&self) -> bool {
        self.admissible == self.threshold_condition
    }

    pub fn describe_violation(&self) -> String {
        let bad: Vec<String> = self
            .k
            .iter()
            .enumerate()
            .filter(|(_, k)| **k <= 0.0)
            .map(|(j, k)| format!("K_{} = {k:.6}", j + 1))
            .collect();
        format!(
            "a doubly periodic solution needs every K_j > 0, but {}; threshold (l+1)|Omega|/(4 pi) = {:.6}",
            bad.join(", "),
            self.threshold
        )
    }
}

pub fn existence_condition(spec: &VortexSpec) -> Result<ExistenceReport> {
    let torus = spec.torus()?;
    let area = torus.area();
    let l = spec.l as f64;
    let counts = spec.counts();
    let total = spec.total() as f64;
    let threshold = (l + 1.0) * area / (4.0 * PI);
    let k: Vec<f64> = counts
        .iter()
        .map(|&n| area - 4.0 * PI * n as f64 + 4.0 * PI / (l + 1.0) * total)
        .collect();
    let margins = counts.iter().map(|&n| threshold - n as f64).collect();
    let max_n = counts.iter().copied().max().unwrap_or(0) as f64;
    Ok(ExistenceReport {
        admissible: k.iter().all(|&v| v > 0.0),
        threshold,
        margins,
        k,
        threshold_condition: max_n < threshold,
    })
}

#[derive(Clone, Debug)]
pub struct PeriodicProblem {
    pub spec: VortexSpec,
    pub coupling: CouplingData,
    pub background: BackgroundData,
    /// `a_j = (l+1) − 4πN_j/|Ω|`.
    pub a: Vec<f64>,
    /// `b = L⁻¹a`.
    pub b: Vec<f64>,
    pub k: Vec<f64>,
    pub gate: ExistenceReport,
    core: CoupledExp,
}

impl PeriodicProblem {
    pub fn new(spec: VortexSpec) -> Result<Self> {
        let torus = *spec.torus()?;
        let background = periodic_background(&spec, default_smoothing(&torus))?;
        Self::with_background(spec, background)
    }

    pub fn with_background(spec: VortexSpec, background: BackgroundData) -> Result<Self> {
        let torus = *spec.torus()?;
        let coupling = CouplingData::build(spec.l)?;
        let gate = existence_condition(&spec)?;
        let lp1 = (spec.l + 1) as f64;
        let a: Vec<f64> = spec
            .counts()
            .iter()
            .map(|&n| lp1 - 4.0 * PI * n as f64 / torus.area())
            .collect();
        let b = coupling.w_from_v(&a)?;
        let core = CoupledExp::new(coupling.clone(), spec.domain, &background.exp_u0);
        Ok(Self {
            k: gate.k.clone(),
            spec,
            coupling,
            background,
            a,
            b,
            gate,
            core,
        })
    }

    pub fn l(&self) -> usize {
        self.spec.l
    }

    pub fn zero_guess(&self) -> Vec<ScalarField2D> {
        vec![ScalarField2D::zeros(self.spec.domain); self.l()]
    }

    /// `e^{u_j} = e^{u⁰_j + (Lw)_j}` for an arbitrary `w` on this grid.
    pub fn exp_u(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        let (_, u) = self.core.exponentials(&self.flat(w)?)?;
        Ok(ScalarField2D::unflatten(self.spec.domain, u, self.l()))
    }

    fn check_gate(&self) -> Result<()> {
        if self.gate.admissible {
            Ok(())
        } else {
            Err(VortexError::GateRefused(self.gate.describe_violation()))
        }
    }

    fn flat(&self, w: &[ScalarField2D]) -> Result<Vec<f64>> {
        if w.len() != self.l() {
            return Err(VortexError::Shape {
                expected: self.l(),
                got: w.len(),
            });
        }
        Ok(ScalarField2D::flatten(w).1)
    }

    /// `I(w) = ∫ ½Σ|∇w_i|² + Σ e^{u⁰_i + (Lw)_i} − Σ b_i w_i`.
    pub fn energy(&self, w: &[ScalarField2D]) -> Result<f64> {
        self.check_gate()?;
        self.energy_flat(&self.flat(w)?)
    }

    /// `grad_j = −Δw_j + (LᵀU)_j − b_j`.
    pub fn gradient(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        self.check_gate()?;
        let g = self.gradient_flat(&self.flat(w)?)?;
        Ok(ScalarField2D::unflatten(self.spec.domain, g, self.l()))
    }

    pub fn hessian_vector(
        &self,
        w: &[ScalarField2D],
        s: &[ScalarField2D],
    ) -> Result<Vec<ScalarField2D>> {
        self.check_gate()?;
        let (_, u) = self.core.exponentials(&self.flat(w)?)?;
        let hs = self.core.apply_hessian(&u, &self.flat(s)?);
        Ok(ScalarField2D::unflatten(self.spec.domain, hs, self.l()))
    }

    fn energy_flat(&self, w: &[f64]) -> Result<f64> {
        let (_, u) = self.core.exponentials(w)?;
        let n = self.core.n;
        let wgt = self.core.weight();
        let mut e = self.core.dirichlet_energy(w);
        for j in 0..self.l() {
            let uj: f64 = u[j * n..(j + 1) * n].iter().sum();
            let wj: f64 = w[j * n..(j + 1) * n].iter().sum();
            e += wgt * (uj - self.b[j] * wj);
        }
        Ok(e)
    }

    fn gradient_flat(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (_, u) = self.core.exponentials(w)?;
        let n = self.core.n;
        let mut g = self.core.coupling.lower_t_apply(&u, n);
        let lap = self.core.laplacian(w);
        for j in 0..self.l() {
            for p in 0..n {
                g[j * n + p] -= lap[j * n + p] + self.b[j];
            }
        }
        Ok(g)
    }

    /// Strong-form residual of `Δv_j = e^{u_j} + Σe^{u_i} − (l+1) + 4πN_j/|Ω|`.
    pub fn residual(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        let r = self.residual_flat(&self.flat(w)?)?;
        Ok(ScalarField2D::unflatten(self.spec.domain, r, self.l()))
    }

    fn residual_flat(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.core.n;
        let lp1 = (self.l() + 1) as f64;
        let mut source = vec![0.0; self.l() * n];
        for (j, a) in self.a.iter().enumerate() {
            source[j * n..(j + 1) * n].fill(lp1 - a);
        }
        self.core.system_residual(w, &source)
    }

    pub fn minimize(&self, w0: Option<&[ScalarField2D]>, opts: &SolveOptions) -> Result<SolveResult> {
        if !opts.force {
            self.check_gate()?;
        }
        if !(opts.tol > 0.0) {
            return Err(VortexError::Domain(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let start = match w0 {
            Some(w) => self.flat(w)?,
            None => vec![0.0; self.core.n * self.l()],
        };
        let nopts = NewtonOptions {
            tol: opts.tol,
            max_outer: opts.max_outer,
            ..Default::default()
        };
        let out = newton::minimize(self, start, &nopts)?;
        let residual = self.residual_flat(&out.w)?;
        let result = assemble_result(
            &self.core,
            self.spec.counts(),
            &self.background.u0_reg,
            out.w,
            out.history,
            out.iterations,
            out.grad_norm,
            &residual,
            opts.residual_tol,
            opts.tol,
        )?;
        if !result.converged {
            return Err(VortexError::NonConvergence {
                iterations: result.iterations,
                grad_norm: result.grad_norm,
                residual: result.residual,
                history: Box::new(result.history),
            });
        }
        Ok(result)
    }
}

impl ConvexObjective for PeriodicProblem {
    fn dim(&self) -> usize {
        self.core.n * self.l()
    }

    fn weight(&self) -> f64 {
        self.core.weight()
    }

    fn energy(&self, w: &[f64]) -> Result<f64> {
        self.energy_flat(w)
    }

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.gradient_flat(w)
    }

    fn curvature(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.core.exponentials(w)?.1)
    }

    fn apply_hessian(&self, curvature: &[f64], s: &[f64]) -> Vec<f64> {
        self.core.apply_hessian(curvature, s)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        self.core.precondition(r)
    }

    fn components(&self) -> usize {
        self.l()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, TorusGeometry};

    fn spec(l: usize, side: f64, points: Vec<Vec<[f64; 2]>>, n: usize) -> VortexSpec {
        let t = TorusGeometry::new(side, side, n, n).unwrap();
        VortexSpec::new(l, points, Grid::Torus(t)).unwrap()
    }

    #[test]
    fn gate_admissible_pair() {
        let s = spec(2, 2.0 * PI, vec![vec![[1.0, 1.0]], vec![[2.0, 2.0]]], 16);
        let g = existence_condition(&s).unwrap();
        assert!(g.admissible && g.threshold_condition);
        assert!((g.threshold - 3.0 * PI).abs() < 1e-12);
        let k = 4.0 * PI * PI - 4.0 * PI + 8.0 * PI / 3.0;
        assert!((g.k[0] - k).abs() < 1e-12 && (g.k[1] - k).abs() < 1e-12);
        assert!((g.k[0] - 35.290).abs() < 1e-3);
    }

    #[test]
    fn gate_boundary_case_rejected() {
        let side = (4.0 * PI).sqrt();
        let p = [0.5, 0.5];
        let s = spec(2, side, vec![vec![p, p, p], vec![]], 16);
        let g = existence_condition(&s).unwrap();
        assert!((g.threshold - 3.0).abs() < 1e-12);
        assert!(!g.admissible && !g.threshold_condition);
        assert!((g.k[0] + 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn gate_vacuum() {
        let s = spec(3, 2.0, vec![vec![], vec![], vec![]], 16);
        let g = existence_condition(&s).unwrap();
        assert!(g.admissible);
        assert!(g.k.iter().all(|&k| (k - 4.0).abs() < 1e-15));
    }

    #[test]
    fn gate_criteria_can_disagree() {
        // l = 2, |Ω| = 4π, N = (2, 0): max N_j = 2 < 3 yet K_1 = −4π/3.
        let side = (4.0 * PI).sqrt();
        let p = [0.5, 0.5];
        let s = spec(2, side, vec![vec![p, p], vec![]], 16);
        let g = existence_condition(&s).unwrap();
        assert!(g.threshold_condition);
        assert!(!g.admissible);
        assert!((g.k[0] + 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(!g.criteria_agree());
    }

    #[test]
    fn b_matches_k_relation() {
        let s = spec(3, 4.0, vec![vec![[1.0, 1.0]], vec![[2.0, 3.0], [1.0, 3.0]], vec![]], 16);
        let p = PeriodicProblem::new(s).unwrap();
        let lt_k = p.coupling.lower.transpose() * nalgebra::DVector::from_vec(p.k.clone());
        for j in 0..3 {
            assert!((p.b[j] - lt_k[j] / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_is_exact_solution() {
        let s = spec(2, 3.0, vec![vec![], vec![]], 16);
        let p = PeriodicProblem::new(s).unwrap();
        let g = p.gradient(&p.zero_guess()).unwrap();
        assert!(g.iter().all(|f| f.max_abs() < 1e-13));
        let e = p.energy(&p.zero_guess()).unwrap();
        assert!((e - 2.0 * 9.0).abs() < 1e-12);
        let r = p.minimize(None, &SolveOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.exp_u.iter().all(|f| f.values.iter().all(|&v| (v - 1.0).abs() < 1e-14)));
    }

    #[test]
    fn refuses_inadmissible() {
        let side = (4.0 * PI).sqrt();
        let p = [0.5, 0.5];
        let s = spec(2, side, vec![vec![p, p, p], vec![]], 16);
        let prob = PeriodicProblem::new(s).unwrap();
        assert!(matches!(
            prob.minimize(None, &SolveOptions::default()),
            Err(VortexError::GateRefused(_))
        ));
        assert!(prob.energy(&prob.zero_guess()).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = spec(2, 3.0, vec![vec![], vec![]], 16);
        let p = PeriodicProblem::new(s).unwrap();
        let one = vec![ScalarField2D::zeros(p.spec.domain)];
        assert!(matches!(p.energy(&one), Err(VortexError::Shape { .. })));
    }

    #[test]
    fn overflow_is_diverging() {
        let s = spec(2, 3.0, vec![vec![], vec![]], 16);
        let p = PeriodicProblem::new(s).unwrap();
        let w = vec![ScalarField2D::constant(p.spec.domain, 600.0); 2];
        assert!(matches!(p.energy(&w), Err(VortexError::Diverging { .. })));
    }
}
