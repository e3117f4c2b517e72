//! Vortices in the plane, solved on the box `[-R, R]²` with homogeneous
//! Dirichlet data on `w`.
//!
//! The planar background decays only like `μ/|x|²`, far slower than the
//! solution itself. Near the box edge the background is therefore blended to
//! zero by a radial taper `τ`, so that `u = 0` exactly on the boundary; the
//! source density is corrected by the Laplacian of the taper. Inside the
//! taper radius the background is untouched.

use serde::Serialize;

use crate::background::{planar_background, smooth_step_down, BackgroundData, VortexSpec};
use crate::coupling::CouplingData;
use crate::error::{Result, VortexError};
use crate::functional::{assemble_result, CoupledExp, SolveOptions, SolveResult};
use crate::grid::{Grid, ScalarField2D};
use crate::newton::{self, ConvexObjective, NewtonOptions};

pub const DEFAULT_MU: f64 = 1.0;
/// Upper bound on `h̃ = A⁻¹g` enforced by doubling `μ`.
pub const H_TILDE_BOUND: f64 = 0.5;
const MAX_MU_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Taper {
    /// Below this radius the background is the untouched planar profile.
    pub inner: f64,
    /// Beyond this radius the background is zero.
    pub outer: f64,
}

impl Taper {
    pub fn for_box(half_width: f64, max_vortex_radius: f64) -> Result<Self> {
        let outer = half_width - 1.0;
        let inner = (0.5 * half_width).max(max_vortex_radius + 4.0);
        if inner + 1.0 > outer {
            return Err(VortexError::Domain(format!(
                "box half-width {half_width} leaves no room to taper the background beyond the vortices (max |p| = {max_vortex_radius})"
            )));
        }
        Ok(Self { inner, outer })
    }
}

#[derive(Clone, Debug)]
pub struct PlanarProblem {
    pub spec: VortexSpec,
    pub coupling: CouplingData,
    /// The untapered background at the (possibly escalated) `μ`.
    pub background: BackgroundData,
    pub mu: f64,
    pub taper: Taper,
    /// Source density of the tapered background, `4πΣδ − Δu⁰_eff`.
    pub g_eff: Vec<ScalarField2D>,
    /// `h = L⁻¹ g_eff`.
    pub h: Vec<ScalarField2D>,
    /// `h̃ = A⁻¹ g` from the untapered `g`.
    pub h_tilde: Vec<ScalarField2D>,
    /// `u⁰_eff` minus its singular part `(1−τ)Σ ln|x − p|²`.
    pub u0_reg_eff: Vec<ScalarField2D>,
    core: CoupledExp,
    h_flat: Vec<f64>,
}

/// `(u⁰, ∇u⁰)` of the untapered planar background at `x`, without the
/// `ln ρ²` singularities in `u⁰` (those are carried by the product form).
fn log_terms(points: &[[f64; 2]], mu: f64, x: [f64; 2]) -> (f64, [f64; 2]) {
    let mut val = 0.0;
    let mut grad = [0.0; 2];
    for p in points {
        let d = [x[0] - p[0], x[1] - p[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        val += (r2 / (r2 + mu)).ln();
        let c = 2.0 * mu / (r2 * (r2 + mu));
        grad[0] += c * d[0];
        grad[1] += c * d[1];
    }
    (val, grad)
}

impl PlanarProblem {
    pub fn new(spec: VortexSpec) -> Result<Self> {
        Self::with_mu(spec, DEFAULT_MU)
    }

    /// Builds the problem starting from `mu`, doubling it until `max h̃ <= 1/2`.
    pub fn with_mu(spec: VortexSpec, mu: f64) -> Result<Self> {
        let plane = *spec.plane()?;
        let coupling = CouplingData::build(spec.l)?;
        let grid = spec.domain;
        let n = grid.len();

        let mut mu = mu;
        let mut background = planar_background(&spec, mu)?;
        let mut h_tilde;
        let mut escalations = 0;
        loop {
            let g = background.g.as_ref().expect("planar background has g");
            let (_, g_flat) = ScalarField2D::flatten(g);
            h_tilde = coupling.a_inv_apply(&g_flat, n);
            let worst = h_tilde.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            if worst <= H_TILDE_BOUND {
                break;
            }
            escalations += 1;
            if escalations > MAX_MU_DOUBLINGS {
                return Err(VortexError::Domain(format!(
                    "could not bring max h~ = {worst} below {H_TILDE_BOUND} by enlarging mu"
                )));
            }
            mu *= 2.0;
            background = planar_background(&spec, mu)?;
        }
        if escalations > 0 {
            log::info!("planar regularization scale escalated to mu = {mu}");
        }

        let max_r = spec
            .points
            .iter()
            .flatten()
            .fold(0.0f64, |m, p| m.max(p[0].hypot(p[1])));
        let taper = Taper::for_box(plane.half_width, max_r)?;

        let mut exp_u0 = Vec::with_capacity(spec.l);
        let mut u0_reg_eff = Vec::with_capacity(spec.l);
        let mut g_eff = Vec::with_capacity(spec.l);
        let g = background.g.as_ref().expect("planar background has g");
        for (list, gj) in spec.points.iter().zip(g) {
            let mut e = vec![1.0; n];
            let mut reg = vec![0.0; n];
            let mut src = vec![0.0; n];
            for (idx, x) in grid.nodes().enumerate() {
                let r = x[0].hypot(x[1]);
                let keep = smooth_step_down(r, taper.inner, taper.outer);
                let (u0, du0) = log_terms(list, mu, x);
                // τ = 1 − keep; g_eff = (1−τ)g + 2∇τ·∇u⁰ + u⁰Δτ
                let mut s = keep.v * gj.values[idx];
                if r > 0.0 && (keep.d != 0.0 || keep.dd != 0.0) {
                    let radial = (x[0] * du0[0] + x[1] * du0[1]) / r;
                    s -= 2.0 * keep.d * radial + u0 * (keep.dd + keep.d / r);
                }
                src[idx] = s;
                let mut power = 1.0;
                let mut log_reg = 0.0;
                for p in list {
                    let r2 = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
                    power *= (r2 / (r2 + mu)).powf(keep.v);
                    log_reg -= keep.v * (r2 + mu).ln();
                }
                e[idx] = power;
                reg[idx] = log_reg;
            }
            exp_u0.push(ScalarField2D { grid, values: e });
            u0_reg_eff.push(ScalarField2D { grid, values: reg });
            g_eff.push(ScalarField2D { grid, values: src });
        }
        let (_, g_eff_flat) = ScalarField2D::flatten(&g_eff);
        let h_flat = coupling.lower_inv_apply(&g_eff_flat, n);
        let core = CoupledExp::new(coupling.clone(), grid, &exp_u0);
        Ok(Self {
            h: ScalarField2D::unflatten(grid, h_flat.clone(), spec.l),
            h_tilde: ScalarField2D::unflatten(grid, h_tilde, spec.l),
            spec,
            coupling,
            background,
            mu,
            taper,
            g_eff,
            u0_reg_eff,
            core,
            h_flat,
        })
    }

    pub fn l(&self) -> usize {
        self.spec.l
    }

    pub fn grid(&self) -> Grid {
        self.spec.domain
    }

    /// `e^{u⁰_eff}` of each component, the background the solver actually uses.
    pub fn exp_u0(&self) -> Vec<ScalarField2D> {
        ScalarField2D::unflatten(self.grid(), self.core.exp_u0.clone(), self.l())
    }

    pub fn zero_guess(&self) -> Vec<ScalarField2D> {
        vec![ScalarField2D::zeros(self.grid()); self.l()]
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

    /// `I(w) = ∫ ½Σ|∇w_i|² + Σh_i w_i + Σ(e^{u⁰_i + v_i} − e^{u⁰_i} − v_i)`.
    pub fn energy(&self, w: &[ScalarField2D]) -> Result<f64> {
        self.energy_flat(&self.flat(w)?)
    }

    /// `grad_j = −Δw_j + (Lᵀ(U − 1))_j + h_j`.
    pub fn gradient(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        let g = self.gradient_flat(&self.flat(w)?)?;
        Ok(ScalarField2D::unflatten(self.grid(), g, self.l()))
    }

    pub fn hessian_vector(
        &self,
        w: &[ScalarField2D],
        s: &[ScalarField2D],
    ) -> Result<Vec<ScalarField2D>> {
        let (_, u) = self.core.exponentials(&self.flat(w)?)?;
        let hs = self.core.apply_hessian(&u, &self.flat(s)?);
        Ok(ScalarField2D::unflatten(self.grid(), hs, self.l()))
    }

    fn energy_flat(&self, w: &[f64]) -> Result<f64> {
        let (v, _) = self.core.exponentials(w)?;
        let wgt = self.core.weight();
        let mut bulk = 0.0;
        for idx in 0..w.len() {
            let e0 = self.core.exp_u0[idx];
            bulk += self.h_flat[idx] * w[idx] + e0 * v[idx].exp_m1() - v[idx];
        }
        Ok(self.core.dirichlet_energy(w) + wgt * bulk)
    }

    fn gradient_flat(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (_, u) = self.core.exponentials(w)?;
        let n = self.core.n;
        let shifted: Vec<f64> = u.iter().map(|x| x - 1.0).collect();
        let mut g = self.core.coupling.lower_t_apply(&shifted, n);
        let lap = self.core.laplacian(w);
        for idx in 0..g.len() {
            g[idx] += self.h_flat[idx] - lap[idx];
        }
        Ok(g)
    }

    /// Strong-form residual of `Δv_j = e^{u_j} + Σe^{u_i} − (l+1) + g_j`.
    pub fn residual(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        let r = self.residual_flat(&self.flat(w)?)?;
        Ok(ScalarField2D::unflatten(self.grid(), r, self.l()))
    }

    fn residual_flat(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (_, g) = ScalarField2D::flatten(&self.g_eff);
        self.core.system_residual(w, &g)
    }

    pub fn minimize(&self, w0: Option<&[ScalarField2D]>, opts: &SolveOptions) -> Result<SolveResult> {
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
            &self.u0_reg_eff,
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

impl ConvexObjective for PlanarProblem {
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

#[derive(Clone, Debug, Serialize)]
pub struct DecaySample {
    pub r: f64,
    pub log_usq: f64,
    pub log_gradsq: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub window: [f64; 2],
    /// Minus the slope of `ln Σu_i²` against `|x|`.
    pub rate: f64,
    /// Intercept `ln C` of the same fit.
    pub log_c: f64,
    pub c: f64,
    /// Decay rate of the amplitude `(Σu_i²)^{1/2}`, half of `rate`.
    pub amplitude_rate: f64,
    /// Minus the slope of `ln Σ|∇u_i|²` against `|x|`.
    pub grad_rate: f64,
    pub grad_log_c: f64,
    #[serde(skip)]
    pub samples: Vec<DecaySample>,
}

impl DecayFit {
    /// Samples as CSV with header `r,log_usq,log_gradsq`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,log_usq,log_gradsq\n");
        for p in &self.samples {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", p.r, p.log_usq, p.log_gradsq));
        }
        s
    }
}

/// Least-squares line `y ≈ a + b·x`; returns `(a, b)`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Exponential decay fit of `Σu_i²` and `Σ|∇u_i|²` over the annulus
/// `r1 <= |x| <= r2`.
pub fn decay_rate(result: &SolveResult, window: [f64; 2]) -> Result<DecayFit> {
    let Grid::Plane(plane) = result.grid else {
        return Err(VortexError::WrongDomain("decay fits need a planar result".into()));
    };
    let [r1, r2] = window;
    if !(r1 >= 0.0 && r2 > r1) {
        return Err(VortexError::Domain(format!("invalid window [{r1}, {r2}]")));
    }
    if r2 >= plane.half_width - 2.0 {
        return Err(VortexError::Domain(format!(
            "window end {r2} must stay below R − 2 = {}",
            plane.half_width - 2.0
        )));
    }
    let grid = result.grid;
    let (cols, rows) = grid.shape();
    let (hx, hy) = grid.spacing();
    let u = result.u();
    let at = |f: &ScalarField2D, i: usize, j: usize| f.values[j * cols + i];
    // fourth-order central differences
    let d4 = |f: &ScalarField2D, i: usize, j: usize, di: isize, dj: isize, h: f64| {
        let s = |k: isize| {
            at(
                f,
                (i as isize + k * di) as usize,
                (j as isize + k * dj) as usize,
            )
        };
        (-s(2) + 8.0 * s(1) - 8.0 * s(-1) + s(-2)) / (12.0 * h)
    };

    let mut samples = Vec::new();
    let mut min_usq = f64::INFINITY;
    for j in 2..rows.saturating_sub(2) {
        for i in 2..cols.saturating_sub(2) {
            let x = grid.node(i, j);
            let r = x[0].hypot(x[1]);
            if r < r1 || r > r2 {
                continue;
            }
            let mut usq = 0.0;
            let mut gsq = 0.0;
            for f in &u {
                usq += at(f, i, j).powi(2);
                gsq += d4(f, i, j, 1, 0, hx).powi(2) + d4(f, i, j, 0, 1, hy).powi(2);
            }
            min_usq = min_usq.min(usq);
            samples.push(DecaySample {
                r,
                log_usq: usq.ln(),
                log_gradsq: gsq.ln(),
            });
        }
    }
    if samples.len() < 2 {
        return Err(VortexError::Domain(format!(
            "window [{r1}, {r2}] holds fewer than two grid nodes"
        )));
    }
    if !(min_usq >= 1e2 * f64::EPSILON) || samples.iter().any(|s| !s.log_gradsq.is_finite()) {
        return Err(VortexError::Underflow {
            r1,
            r2,
            min_value: min_usq,
        });
    }
    samples.sort_by(|a, b| a.r.total_cmp(&b.r));
    let rs: Vec<f64> = samples.iter().map(|s| s.r).collect();
    let lu: Vec<f64> = samples.iter().map(|s| s.log_usq).collect();
    let lg: Vec<f64> = samples.iter().map(|s| s.log_gradsq).collect();
    let (log_c, slope) = fit_line(&rs, &lu);
    let (grad_log_c, grad_slope) = fit_line(&rs, &lg);
    Ok(DecayFit {
        window,
        rate: -slope,
        log_c,
        c: log_c.exp(),
        amplitude_rate: -0.5 * slope,
        grad_rate: -grad_slope,
        grad_log_c,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PlanarTruncation;

    fn spec(l: usize, points: Vec<Vec<[f64; 2]>>, r: f64, n: usize) -> VortexSpec {
        let p = PlanarTruncation::new(r, n, n).unwrap();
        VortexSpec::new(l, points, Grid::Plane(p)).unwrap()
    }

    #[test]
    fn vacuum_gradient_and_energy_vanish() {
        let p = PlanarProblem::new(spec(2, vec![vec![], vec![]], 8.0, 32)).unwrap();
        let w = p.zero_guess();
        assert!(p.gradient(&w).unwrap().iter().all(|f| f.max_abs() == 0.0));
        assert_eq!(p.energy(&w).unwrap(), 0.0);
    }

    #[test]
    fn energy_vanishes_at_zero_with_vortices() {
        let p = PlanarProblem::new(spec(3, vec![vec![[0.0, 0.0]], vec![[1.0, 0.5]], vec![]], 10.0, 64))
            .unwrap();
        assert_eq!(p.energy(&p.zero_guess()).unwrap(), 0.0);
    }

    #[test]
    fn mu_escalates_until_h_tilde_bounded() {
        let p = PlanarProblem::new(spec(2, vec![vec![[0.0, 0.0]], vec![]], 10.0, 64)).unwrap();
        assert!(p.mu > DEFAULT_MU);
        let worst = p
            .h_tilde
            .iter()
            .flat_map(|f| f.values.iter())
            .fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        assert!(worst <= H_TILDE_BOUND);
        // one doubling earlier the bound fails
        let q = PlanarProblem::with_mu(p.spec.clone(), p.mu / 2.0);
        assert!(q.unwrap().mu == p.mu);
    }

    #[test]
    fn tapered_source_keeps_total_charge() {
        let p = PlanarProblem::new(spec(2, vec![vec![[0.0, 0.0], [1.0, 1.0]], vec![[-1.0, 0.0]]], 12.0, 128))
            .unwrap();
        for (g, n) in p.g_eff.iter().zip(p.spec.counts()) {
            let target = 4.0 * std::f64::consts::PI * n as f64;
            assert!((g.integrate() - target).abs() < 1e-4 * target.max(1.0), "{} vs {target}", g.integrate());
        }
    }

    #[test]
    fn tapered_background_is_one_near_boundary() {
        let p = PlanarProblem::new(spec(2, vec![vec![[0.0, 0.0]], vec![]], 10.0, 64)).unwrap();
        let e = p.exp_u0();
        for (x, v) in p.grid().nodes().zip(&e[0].values) {
            if x[0].hypot(x[1]) >= p.taper.outer {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn box_too_small_for_taper() {
        let s = spec(2, vec![vec![[3.0, 0.0]], vec![]], 5.0, 32);
        assert!(PlanarProblem::new(s).is_err());
    }

    #[test]
    fn decay_rejects_window_near_boundary() {
        let p = PlanarProblem::new(spec(2, vec![vec![], vec![]], 8.0, 32)).unwrap();
        let r = p.minimize(None, &SolveOptions::default()).unwrap();
        assert!(matches!(decay_rate(&r, [2.0, 7.0]), Err(VortexError::Domain(_))));
        assert!(matches!(decay_rate(&r, [2.0, 5.0]), Err(VortexError::Underflow { .. })));
    }

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = fit_line(&x, &y);
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
    }
}
