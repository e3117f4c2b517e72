//! Diagonal operators in Fourier space (torus) and sine space (Dirichlet box).
//!
//! Both transforms diagonalize the Laplacian; an operator is described by a
//! multiplier `m(|k|²)` applied to every mode.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Clone)]
enum Plans {
    Fourier {
        fx: Arc<dyn Fft<f64>>,
        ifx: Arc<dyn Fft<f64>>,
        fy: Arc<dyn Fft<f64>>,
        ify: Arc<dyn Fft<f64>>,
    },
    Sine {
        fx: Arc<dyn Fft<f64>>,
        fy: Arc<dyn Fft<f64>>,
    },
}

/// Cached transforms and squared wavenumbers for one grid.
#[derive(Clone)]
pub struct SpectralOps {
    grid: Grid,
    plans: Plans,
    /// `|k|²` in transposed layout: index `ix * rows + iy`.
    k2: Vec<f64>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps").field("grid", &self.grid).finish()
    }
}

fn fourier_wavenumbers(n: usize, len: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * PI * m / len
        })
        .collect()
}

fn transpose<T: Copy + Default>(data: &[T], cols: usize, rows: usize) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    for j in 0..rows {
        for i in 0..cols {
            out[i * rows + j] = data[j * cols + i];
        }
    }
    out
}

fn fft_rows(data: &mut [Complex64], row_len: usize, plan: &Arc<dyn Fft<f64>>) {
    let scratch_len = plan.get_inplace_scratch_len();
    data.par_chunks_mut(row_len).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, row| plan.process_with_scratch(row, scratch),
    );
}

/// Unnormalized DST-I of every row, `S_k = Σ_j f_j sin(π j k/(n+1))`, through
/// an odd extension of length `2(n+1)`.
fn dst_rows(data: &mut [f64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    let m = 2 * (n + 1);
    let scratch_len = plan.get_inplace_scratch_len();
    data.par_chunks_mut(n).for_each_init(
        || {
            (
                vec![Complex64::default(); m],
                vec![Complex64::default(); scratch_len],
            )
        },
        |(buf, scratch), row| {
            buf[0] = Complex64::default();
            buf[n + 1] = Complex64::default();
            for (j, &v) in row.iter().enumerate() {
                buf[j + 1] = Complex64::new(v, 0.0);
                buf[m - 1 - j] = Complex64::new(-v, 0.0);
            }
            plan.process_with_scratch(buf, scratch);
            for (k, out) in row.iter_mut().enumerate() {
                *out = -0.5 * buf[k + 1].im;
            }
        },
    );
}

impl SpectralOps {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let (cols, rows) = grid.shape();
        match grid {
            Grid::Torus(t) => {
                let kx = fourier_wavenumbers(t.nx, t.lx);
                let ky = fourier_wavenumbers(t.ny, t.ly);
                let k2 = kx
                    .iter()
                    .flat_map(|a| ky.iter().map(move |b| a * a + b * b))
                    .collect();
                Self {
                    grid,
                    plans: Plans::Fourier {
                        fx: planner.plan_fft_forward(cols),
                        ifx: planner.plan_fft_inverse(cols),
                        fy: planner.plan_fft_forward(rows),
                        ify: planner.plan_fft_inverse(rows),
                    },
                    k2,
                }
            }
            Grid::Plane(p) => {
                let width = 2.0 * p.half_width;
                let kx: Vec<f64> = (1..=cols).map(|k| PI * k as f64 / width).collect();
                let ky: Vec<f64> = (1..=rows).map(|k| PI * k as f64 / width).collect();
                let k2 = kx
                    .iter()
                    .flat_map(|a| ky.iter().map(move |b| a * a + b * b))
                    .collect();
                Self {
                    grid,
                    plans: Plans::Sine {
                        fx: planner.plan_fft_forward(2 * (cols + 1)),
                        fy: planner.plan_fft_forward(2 * (rows + 1)),
                    },
                    k2,
                }
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Applies `m(|k|²)` mode by mode. On the torus also returns the largest
    /// imaginary residue relative to the largest real output.
    pub fn apply_multiplier_checked(
        &self,
        input: &[f64],
        m: impl Fn(f64) -> f64 + Sync,
    ) -> (Vec<f64>, f64) {
        let (cols, rows) = self.grid.shape();
        assert_eq!(input.len(), cols * rows);
        match &self.plans {
            Plans::Fourier { fx, ifx, fy, ify } => {
                let mut data: Vec<Complex64> =
                    input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft_rows(&mut data, cols, fx);
                let mut t = transpose(&data, cols, rows);
                fft_rows(&mut t, rows, fy);
                t.par_iter_mut()
                    .zip(self.k2.par_iter())
                    .for_each(|(c, &k2)| *c *= m(k2));
                fft_rows(&mut t, rows, ify);
                let mut data = transpose(&t, rows, cols);
                fft_rows(&mut data, cols, ifx);
                let scale = 1.0 / (cols * rows) as f64;
                let mut max_re = 0.0f64;
                let mut max_im = 0.0f64;
                let out = data
                    .iter()
                    .map(|c| {
                        max_re = max_re.max(c.re.abs());
                        max_im = max_im.max(c.im.abs());
                        c.re * scale
                    })
                    .collect();
                let rel = if max_re > 0.0 { max_im / max_re } else { max_im };
                (out, rel)
            }
            Plans::Sine { fx, fy } => {
                let mut data = input.to_vec();
                dst_rows(&mut data, cols, fx);
                let mut t = transpose(&data, cols, rows);
                dst_rows(&mut t, rows, fy);
                t.par_iter_mut()
                    .zip(self.k2.par_iter())
                    .for_each(|(c, &k2)| *c *= m(k2));
                dst_rows(&mut t, rows, fy);
                let mut data = transpose(&t, rows, cols);
                dst_rows(&mut data, cols, fx);
                let scale = 4.0 / ((cols + 1) * (rows + 1)) as f64;
                data.iter_mut().for_each(|v| *v *= scale);
                (data, 0.0)
            }
        }
    }

    pub fn apply_multiplier(&self, input: &[f64], m: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        self.apply_multiplier_checked(input, m).0
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_multiplier(f, |k2| -k2)
    }

    /// `(−Δ + c)⁻¹ f`; on the torus the zero mode is divided by `c`.
    pub fn shifted_inverse(&self, f: &[f64], c: f64) -> Vec<f64> {
        self.apply_multiplier(f, move |k2| 1.0 / (k2 + c))
    }

    /// Solution of `Δu = f` with the zero mode of `u` set to 0. The caller is
    /// responsible for the solvability of `f` on the torus.
    pub(crate) fn inverse_laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_multiplier(f, |k2| if k2 == 0.0 { 0.0 } else { -1.0 / k2 })
    }

    /// `½∫|∇f|² = −½∫ f Δf`.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        let lap = self.laplacian(f);
        -0.5 * self.grid.cell_area() * f.iter().zip(&lap).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Trigonometric interpolation of a torus field onto a finer grid.
    pub fn fourier_interpolate(&self, input: &[f64], target: Grid) -> Vec<f64> {
        let (Plans::Fourier { fx, fy, .. }, Grid::Torus(dst)) = (&self.plans, target) else {
            panic!("fourier_interpolate needs torus grids");
        };
        let (cols, rows) = self.grid.shape();
        assert!(dst.nx >= cols && dst.ny >= rows);
        let mut data: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_rows(&mut data, cols, fx);
        let mut t = transpose(&data, cols, rows);
        fft_rows(&mut t, rows, fy);

        // Map each source mode to its signed frequency; split Nyquist modes.
        let place = |m: usize, n: usize, big: usize| -> Vec<(usize, f64)> {
            if n % 2 == 0 && m == n / 2 {
                vec![(n / 2, 0.5), (big - n / 2, 0.5)]
            } else if m <= n / 2 {
                vec![(m, 1.0)]
            } else {
                vec![(big - (n - m), 1.0)]
            }
        };
        let mut big = vec![Complex64::default(); dst.nx * dst.ny];
        for ix in 0..cols {
            for (bx, wx) in place(ix, cols, dst.nx) {
                for iy in 0..rows {
                    for (by, wy) in place(iy, rows, dst.ny) {
                        big[bx * dst.ny + by] += t[ix * rows + iy] * (wx * wy);
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        let ifx = planner.plan_fft_inverse(dst.nx);
        let ify = planner.plan_fft_inverse(dst.ny);
        fft_rows(&mut big, dst.ny, &ify);
        let mut data = transpose(&big, dst.ny, dst.nx);
        fft_rows(&mut data, dst.nx, &ifx);
        let scale = 1.0 / (cols * rows) as f64;
        data.iter().map(|c| c.re * scale).collect()
    }
}
