//! The coupling matrix `A = I + 11ᵀ` and its closed-form factorizations.
//!
//! Every entry here comes from an explicit formula, never from an iterative
//! factorization, so the identities `L Lᵀ = A`, `L L⁻¹ = I` and `A A⁻¹ = I`
//! can be checked against an independent dense routine.
//!
//! Field-level helpers work on component-major flat buffers: component `j`
//! occupies `buf[j * n..(j + 1) * n]`.

use nalgebra::DMatrix;

use crate::error::{Result, VortexError};
use crate::grid::ScalarField2D;

#[derive(Clone, Debug)]
pub struct CouplingData {
    pub l: usize,
    pub a: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub lower_inv: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    diag: Vec<f64>,
    diag_inv: Vec<f64>,
    sub: Vec<f64>,
}

/// `L[k][k] = sqrt((k+1)/k)` with 1-based `k`.
fn lower_diag(k: usize) -> f64 {
    let k = k as f64;
    ((k + 1.0) / k).sqrt()
}

/// `L[j][k] = 1/sqrt(k(k+1))` for `j > k`, independent of `j`.
fn lower_sub(k: usize) -> f64 {
    let k = k as f64;
    (1.0 / (k * (k + 1.0))).sqrt()
}

impl CouplingData {
    pub fn build(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(VortexError::Domain(format!(
                "component count l = {l}; at least 2 components are required"
            )));
        }
        let a = DMatrix::from_fn(l, l, |i, j| if i == j { 2.0 } else { 1.0 });
        let lower = DMatrix::from_fn(l, l, |j, k| {
            if j == k {
                lower_diag(k + 1)
            } else if j > k {
                lower_sub(k + 1)
            } else {
                0.0
            }
        });
        let lower_inv = DMatrix::from_fn(l, l, |j, k| {
            let jj = (j + 1) as f64;
            if j == k {
                (jj / (jj + 1.0)).sqrt()
            } else if j > k {
                -(1.0 / (jj * (jj + 1.0))).sqrt()
            } else {
                0.0
            }
        });
        let lp1 = (l + 1) as f64;
        let a_inv = DMatrix::from_fn(l, l, |i, j| {
            if i == j {
                l as f64 / lp1
            } else {
                -1.0 / lp1
            }
        });
        let mut eigenvalues = vec![1.0; l];
        eigenvalues[0] = lp1;

        Ok(Self {
            l,
            a,
            lower,
            lower_inv,
            a_inv,
            eigenvalues,
            diag: (1..=l).map(lower_diag).collect(),
            diag_inv: (1..=l).map(|k| 1.0 / lower_diag(k)).collect(),
            sub: (1..=l).map(lower_sub).collect(),
        })
    }

    pub fn lambda_max(&self) -> f64 {
        (self.l + 1) as f64
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.l {
            return Err(VortexError::Shape {
                expected: self.l,
                got: len,
            });
        }
        Ok(())
    }

    /// `v = L w` from the component formulas.
    pub fn v_from_w(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(w.len())?;
        Ok(self.lower_apply(w, 1))
    }

    /// `w = L⁻¹ v` from the component formulas.
    pub fn w_from_v(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(self.lower_inv_apply(v, 1))
    }

    pub fn v_from_w_fields(&self, w: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        self.check_len(w.len())?;
        let (grid, flat) = ScalarField2D::flatten(w);
        let v = self.lower_apply(&flat, grid.len());
        Ok(ScalarField2D::unflatten(grid, v, self.l))
    }

    pub fn w_from_v_fields(&self, v: &[ScalarField2D]) -> Result<Vec<ScalarField2D>> {
        self.check_len(v.len())?;
        let (grid, flat) = ScalarField2D::flatten(v);
        let w = self.lower_inv_apply(&flat, grid.len());
        Ok(ScalarField2D::unflatten(grid, w, self.l))
    }

    /// Blockwise `L x`; each block has length `n`.
    pub(crate) fn lower_apply(&self, x: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.l * n);
        let mut out = vec![0.0; x.len()];
        let mut prefix = vec![0.0; n];
        for j in 0..self.l {
            let xj = &x[j * n..(j + 1) * n];
            let oj = &mut out[j * n..(j + 1) * n];
            let d = self.diag[j];
            for p in 0..n {
                oj[p] = prefix[p] + d * xj[p];
            }
            let s = self.sub[j];
            for p in 0..n {
                prefix[p] += s * xj[p];
            }
        }
        out
    }

    /// Blockwise `L⁻¹ x`, by forward substitution on the closed form.
    pub(crate) fn lower_inv_apply(&self, x: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.l * n);
        let mut out = vec![0.0; x.len()];
        let mut prefix = vec![0.0; n];
        for j in 0..self.l {
            let jj = (j + 1) as f64;
            let off = -(1.0 / (jj * (jj + 1.0))).sqrt();
            let d = self.diag_inv[j];
            let xj = &x[j * n..(j + 1) * n];
            let oj = &mut out[j * n..(j + 1) * n];
            for p in 0..n {
                oj[p] = off * prefix[p] + d * xj[p];
                prefix[p] += xj[p];
            }
        }
        out
    }

    /// Blockwise `Lᵀ x`.
    pub(crate) fn lower_t_apply(&self, x: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.l * n);
        let mut out = vec![0.0; x.len()];
        let mut suffix = vec![0.0; n];
        for k in (0..self.l).rev() {
            let xk = &x[k * n..(k + 1) * n];
            let ok = &mut out[k * n..(k + 1) * n];
            let d = self.diag[k];
            let s = self.sub[k];
            for p in 0..n {
                ok[p] = d * xk[p] + s * suffix[p];
                suffix[p] += xk[p];
            }
        }
        out
    }

    /// Blockwise `A⁻¹ x = x − (Σ x)/(l+1)`.
    pub(crate) fn a_inv_apply(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut total = vec![0.0; n];
        for j in 0..self.l {
            for (t, v) in total.iter_mut().zip(&x[j * n..(j + 1) * n]) {
                *t += v;
            }
        }
        let lp1 = self.lambda_max();
        let mut out = x.to_vec();
        for j in 0..self.l {
            for (o, t) in out[j * n..(j + 1) * n].iter_mut().zip(&total) {
                *o -= t / lp1;
            }
        }
        out
    }
}
