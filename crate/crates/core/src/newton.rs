//! Inexact Newton iteration for smooth strictly convex functionals.
//!
//! Each outer step solves `H d = −∇I` by preconditioned conjugate gradients
//! and backtracks on the energy with the Armijo rule. Inner products are the
//! discrete `L²` products of the underlying grid, so `∇I` is the `L²`
//! gradient and `H` is self-adjoint.

use serde::Serialize;

use crate::error::{Result, VortexError};

pub trait ConvexObjective {
    /// Length of the flat unknown vector.
    fn dim(&self) -> usize;

    /// Quadrature weight of one entry in the `L²` product.
    fn weight(&self) -> f64;

    fn energy(&self, w: &[f64]) -> Result<f64>;

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>>;

    /// Pointwise data of the second variation at `w`.
    fn curvature(&self, w: &[f64]) -> Result<Vec<f64>>;

    fn apply_hessian(&self, curvature: &[f64], s: &[f64]) -> Vec<f64>;

    fn precondition(&self, r: &[f64]) -> Vec<f64>;

    /// Number of blocks the unknown splits into; used for per-block means.
    fn components(&self) -> usize {
        1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub armijo: f64,
    pub min_step: f64,
    /// Largest sup-norm of a search direction; longer directions are scaled
    /// down. Only degenerate curvature, as in a non-coercive functional,
    /// produces such directions.
    pub max_direction: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 200,
            max_inner: 400,
            armijo: 1e-4,
            min_step: 1e-12,
            max_direction: 20.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// Line-search step accepted after this record (0 on the final row).
    pub step: f64,
    pub cg_iterations: usize,
    /// Mean of each block of the iterate.
    pub means: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct History {
    pub records: Vec<IterationRecord>,
}

impl History {
    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    /// Iteration table with header `iter,energy,grad_norm,step,mean_1,...`.
    pub fn to_csv(&self) -> String {
        let blocks = self.records.first().map_or(0, |r| r.means.len());
        let mut s = String::from("iter,energy,grad_norm,step");
        for j in 1..=blocks {
            s.push_str(&format!(",mean_{j}"));
        }
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}",
                r.iter, r.energy, r.grad_norm, r.step
            ));
            for m in &r.means {
                s.push_str(&format!(",{m:.17e}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub w: Vec<f64>,
    pub history: History,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64], weight: f64) -> f64 {
    weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn block_means(w: &[f64], blocks: usize) -> Vec<f64> {
    let n = w.len() / blocks;
    w.chunks(n)
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect()
}

/// Preconditioned CG for `H d = b` starting from `d = 0`.
fn pcg<O: ConvexObjective + ?Sized>(
    obj: &O,
    curvature: &[f64],
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let wgt = obj.weight();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let b_norm = dot(b, b, wgt).sqrt();
    if b_norm == 0.0 {
        return (x, 0);
    }
    let mut z = obj.precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z, wgt);
    for it in 0..max_iter {
        let hp = obj.apply_hessian(curvature, &p);
        let php = dot(&p, &hp, wgt);
        if !(php > 0.0) || !php.is_finite() {
            if it == 0 {
                // Degenerate curvature; fall back to the preconditioned gradient.
                return (z, 0);
            }
            return (x, it);
        }
        let alpha = rz / php;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &hp, &mut r);
        if dot(&r, &r, wgt).sqrt() <= rtol * b_norm {
            return (x, it + 1);
        }
        z = obj.precondition(&r);
        let rz_new = dot(&r, &z, wgt);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    (x, max_iter)
}

pub fn minimize<O: ConvexObjective + ?Sized>(
    obj: &O,
    w0: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    assert_eq!(w0.len(), obj.dim());
    let wgt = obj.weight();
    let blocks = obj.components();
    let mut w = w0;
    let mut history = History::default();
    let mut energy = obj.energy(&w)?;
    for iter in 0..=opts.max_outer {
        let grad = obj.gradient(&w)?;
        let grad_norm = dot(&grad, &grad, wgt).sqrt();
        history.records.push(IterationRecord {
            iter,
            energy,
            grad_norm,
            step: 0.0,
            cg_iterations: 0,
            means: block_means(&w, blocks),
        });
        if grad_norm <= opts.tol {
            return Ok(NewtonOutcome {
                w,
                history,
                iterations: iter,
                grad_norm,
                converged: true,
            });
        }
        if iter == opts.max_outer {
            break;
        }
        let curvature = obj.curvature(&w)?;
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let rtol = grad_norm.sqrt().min(0.1).max(1e-12);
        let (mut dir, cg_its) = pcg(obj, &curvature, &neg, rtol, opts.max_inner);
        let longest = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if longest > opts.max_direction {
            let scale = opts.max_direction / longest;
            dir.iter_mut().for_each(|d| *d *= scale);
        }
        let slope = dot(&grad, &dir, wgt);

        let mut step = 1.0;
        let accepted = loop {
            let mut trial = w.clone();
            axpy(step, &dir, &mut trial);
            let e = match obj.energy(&trial) {
                Ok(e) if e.is_finite() => e,
                Ok(_) | Err(VortexError::Diverging { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let predicted = opts.armijo * step * slope;
            // Energy differences below rounding cannot discriminate steps.
            let resolvable = predicted.abs() > 1e-14 * energy.abs().max(1.0);
            if e <= energy + predicted || (!resolvable && e.is_finite()) {
                break Some((trial, e));
            }
            step *= 0.5;
            if step < opts.min_step {
                break None;
            }
        };
        let Some((trial, e)) = accepted else {
            return Err(VortexError::LineSearch {
                iteration: iter,
                min_step: opts.min_step,
            });
        };
        if let Some(last) = history.records.last_mut() {
            last.step = step;
            last.cg_iterations = cg_its;
        }
        w = trial;
        energy = e;
    }
    let grad_norm = history.records.last().map_or(f64::NAN, |r| r.grad_norm);
    Ok(NewtonOutcome {
        w,
        iterations: opts.max_outer,
        grad_norm,
        converged: false,
        history,
    })
}
