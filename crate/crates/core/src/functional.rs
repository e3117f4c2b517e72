//! Pieces shared by the periodic and planar functionals: the exponential
//! nonlinearity `U_i = e^{u⁰_i + (Lw)_i}`, the second variation and the
//! spectral preconditioner.

use serde::Serialize;

use crate::coupling::CouplingData;
use crate::error::{Result, VortexError};
use crate::grid::{Grid, ScalarField2D};
use crate::newton::History;
use crate::spectral::SpectralOps;

/// Largest exponent accepted before the iterate is declared divergent.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Clone, Debug)]
pub(crate) struct CoupledExp {
    pub coupling: CouplingData,
    pub ops: SpectralOps,
    /// `e^{u⁰}` blocks, component-major.
    pub exp_u0: Vec<f64>,
    pub n: usize,
}

impl CoupledExp {
    pub fn new(coupling: CouplingData, grid: Grid, exp_u0: &[ScalarField2D]) -> Self {
        let (_, flat) = ScalarField2D::flatten(exp_u0);
        Self {
            coupling,
            ops: SpectralOps::new(grid),
            exp_u0: flat,
            n: grid.len(),
        }
    }

    pub fn l(&self) -> usize {
        self.coupling.l
    }

    pub fn weight(&self) -> f64 {
        self.ops.grid().cell_area()
    }

    /// `(v, U)` with `v = Lw` and `U = e^{u⁰}·e^{v}`.
    pub fn exponentials(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let v = self.coupling.lower_apply(w, self.n);
        if let Some(&worst) = v.iter().find(|x| **x > MAX_EXPONENT || x.is_nan()) {
            return Err(VortexError::Diverging { exponent: worst });
        }
        let u = v
            .iter()
            .zip(&self.exp_u0)
            .map(|(vi, e)| e * vi.exp())
            .collect();
        Ok((v, u))
    }

    /// Blockwise spectral Laplacian.
    pub fn laplacian(&self, w: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(w.len());
        for block in w.chunks(self.n) {
            out.extend(self.ops.laplacian(block));
        }
        out
    }

    pub fn dirichlet_energy(&self, w: &[f64]) -> f64 {
        w.chunks(self.n).map(|b| self.ops.dirichlet_energy(b)).sum()
    }

    /// `H s = −Δs + Lᵀ(U ⊙ Ls)`.
    pub fn apply_hessian(&self, u: &[f64], s: &[f64]) -> Vec<f64> {
        let ls = self.coupling.lower_apply(s, self.n);
        let weighted: Vec<f64> = ls.iter().zip(u).map(|(a, b)| a * b).collect();
        let mut out = self.coupling.lower_t_apply(&weighted, self.n);
        let lap = self.laplacian(s);
        out.iter_mut().zip(&lap).for_each(|(o, d)| *o -= d);
        out
    }

    /// `(−Δ + (l+1))⁻¹` on every block.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let c = self.coupling.lambda_max();
        let mut out = Vec::with_capacity(r.len());
        for block in r.chunks(self.n) {
            out.extend(self.ops.shifted_inverse(block, c));
        }
        out
    }

    /// Pointwise residual `Δv_j − (e^{u_j} + Σ_i e^{u_i} − (l+1) + source_j)`.
    pub fn system_residual(&self, w: &[f64], source: &[f64]) -> Result<Vec<f64>> {
        let (v, u) = self.exponentials(w)?;
        let lap_v = self.laplacian(&v);
        let n = self.n;
        let l = self.l();
        let mut total = vec![0.0; n];
        for j in 0..l {
            for p in 0..n {
                total[p] += u[j * n + p];
            }
        }
        let lp1 = (l + 1) as f64;
        let mut res = vec![0.0; l * n];
        for j in 0..l {
            for p in 0..n {
                let idx = j * n + p;
                res[idx] = lap_v[idx] - (u[idx] + total[p] - lp1 + source[idx]);
            }
        }
        Ok(res)
    }

    pub fn block_norms(&self, x: &[f64]) -> Vec<f64> {
        let wgt = self.weight();
        x.chunks(self.n)
            .map(|b| (wgt * b.iter().map(|v| v * v).sum::<f64>()).sqrt())
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveOptions {
    /// Bound on the `L²` norm of the gradient.
    pub tol: f64,
    /// Bound on the `L²` norm of the strong-form residual.
    pub residual_tol: f64,
    pub max_outer: usize,
    /// Skip the existence gate (torus only).
    pub force: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            residual_tol: 1e-8,
            max_outer: 200,
            force: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub l: usize,
    pub grid: Grid,
    /// Vortex counts `N_j`.
    pub counts: Vec<usize>,
    pub w: Vec<ScalarField2D>,
    pub v: Vec<ScalarField2D>,
    /// `e^{u_j}`, zero at the prescribed vortices.
    pub exp_u: Vec<ScalarField2D>,
    /// Regular part of `u_j`: `u⁰_reg + v`.
    pub u_reg: Vec<ScalarField2D>,
    pub history: History,
    pub iterations: usize,
    pub grad_norm: f64,
    pub residual: f64,
    pub residual_components: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    /// `u_j = ln e^{u_j}`; `-∞` at the vortex centres.
    pub fn u(&self) -> Vec<ScalarField2D> {
        self.exp_u.iter().map(|f| f.map(f64::ln)).collect()
    }

    /// Max-norm distance between the `u` fields of two results on the same grid,
    /// skipping nodes where both vanish.
    pub fn u_distance(&self, other: &SolveResult) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.exp_u.iter().zip(&other.exp_u) {
            for (x, y) in a.values.iter().zip(&b.values) {
                if *x == 0.0 && *y == 0.0 {
                    continue;
                }
                worst = worst.max((x.ln() - y.ln()).abs());
            }
        }
        worst
    }

    /// Largest pairwise max-norm difference between components of `u`.
    pub fn component_spread(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.l {
            for j in i + 1..self.l {
                for (x, y) in self.exp_u[i].values.iter().zip(&self.exp_u[j].values) {
                    if *x == 0.0 && *y == 0.0 {
                        continue;
                    }
                    worst = worst.max((x.ln() - y.ln()).abs());
                }
            }
        }
        worst
    }

    pub fn energy_history(&self) -> Vec<f64> {
        self.history.energies()
    }
}

/// Assembles a [`SolveResult`] from a converged or capped Newton run.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_result(
    core: &CoupledExp,
    counts: Vec<usize>,
    u0_reg: &[ScalarField2D],
    w: Vec<f64>,
    history: History,
    iterations: usize,
    grad_norm: f64,
    residual_field: &[f64],
    residual_tol: f64,
    tol: f64,
) -> Result<SolveResult> {
    let grid = *core.ops.grid();
    let l = core.l();
    let (v, u) = core.exponentials(&w)?;
    let residual_components = core.block_norms(residual_field);
    let residual = residual_components.iter().map(|r| r * r).sum::<f64>().sqrt();
    let v_fields = ScalarField2D::unflatten(grid, v, l);
    let u_reg = u0_reg
        .iter()
        .zip(&v_fields)
        .map(|(a, b)| ScalarField2D {
            grid,
            values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
        })
        .collect();
    Ok(SolveResult {
        l,
        grid,
        counts,
        w: ScalarField2D::unflatten(grid, w, l),
        v: v_fields,
        exp_u: ScalarField2D::unflatten(grid, u, l),
        u_reg,
        history,
        iterations,
        grad_norm,
        residual,
        residual_components,
        converged: grad_norm <= tol && residual <= residual_tol,
    })
}
