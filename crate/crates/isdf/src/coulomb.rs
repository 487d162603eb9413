//! Periodic Coulomb interaction on the unit torus.
//!
//! The kernel acts diagonally in Fourier space with multiplier
//! `4 pi / |2 pi k|^2 = 1 / (pi |k|^2)` on integer modes `k`, and `0` on the
//! zero mode (charge neutrality: constants carry no interaction energy). The
//! same formula serves both supported dimensions.
//!
//! Conventions, pinned once here and relied on everywhere:
//!
//! * `apply` returns samples of the continuous convolution `(K f)(x)`,
//!   i.e. inverse-FFT (which carries the `1/n`) of the multiplied spectrum.
//! * `inner(f, g) = <f, K g> = h * sum_x f(x) (K g)(x)` with cell volume
//!   `h = 1/n`; equivalently `h^2 * sum_k m_k conj(F_k) G_k` by Plancherel.
//! * `norm_sq(f) = inner(f, f) = h^2 * sum_k m_k |F_k|^2`, a sum of
//!   non-negative terms, so it can never go negative.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::grid::PeriodicGrid;
use crate::model::OrbitalSet;

pub struct CoulombKernel {
    grid: PeriodicGrid,
    multipliers: Array1<f64>,
    fft: GridFft,
}

impl CoulombKernel {
    pub fn new(grid: PeriodicGrid) -> Self {
        let multipliers = Array1::from_iter((0..grid.len()).map(|idx| {
            let k_sq = grid.mode_norm_sq(idx);
            if k_sq == 0 {
                0.0
            } else {
                1.0 / (PI * k_sq as f64)
            }
        }));
        Self {
            grid,
            multipliers,
            fft: GridFft::new(grid),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Fourier multiplier at flat mode index `idx`.
    pub fn multiplier(&self, idx: usize) -> f64 {
        self.multipliers[idx]
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::GridMismatch("function length must match the grid"));
        }
        Ok(())
    }

    /// Samples of the convolution `(K f)(x)`.
    pub fn apply(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check(f.len())?;
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        for (z, &m) in buf.iter_mut().zip(&self.multipliers) {
            *z *= m;
        }
        self.fft.inverse(&mut buf);
        // multiplier is even in k, so the result of a real input is real
        Ok(Array1::from_iter(buf.iter().map(|z| z.re)))
    }

    /// Interaction energy `<f, K g>`.
    pub fn inner(&self, f: ArrayView1<'_, f64>, g: ArrayView1<'_, f64>) -> Result<f64> {
        self.check(f.len())?;
        self.check(g.len())?;
        let mut fh: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut gh: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut fh);
        self.fft.forward(&mut gh);
        let h = self.grid.cell_volume();
        let sum: f64 = fh
            .iter()
            .zip(&gh)
            .zip(&self.multipliers)
            .map(|((a, b), &m)| m * (a.conj() * b).re)
            .sum();
        Ok(h * h * sum)
    }

    /// Squared interaction norm `<f, K f>`, evaluated as a sum of
    /// non-negative spectral terms.
    pub fn norm_sq(&self, f: ArrayView1<'_, f64>) -> Result<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.norm_sq_from_real(&mut buf)
    }

    /// `norm_sq` on a caller-owned buffer holding the real samples; the
    /// buffer is consumed as FFT workspace. Hot path for per-pair residual
    /// norms.
    pub(crate) fn norm_sq_from_real(&self, buf: &mut [Complex64]) -> Result<f64> {
        self.check(buf.len())?;
        self.fft.forward(buf);
        let h = self.grid.cell_volume();
        let sum: f64 = buf
            .iter()
            .zip(&self.multipliers)
            .map(|(z, &m)| m * z.norm_sqr())
            .sum();
        Ok(h * h * sum)
    }

    pub fn norm(&self, f: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.norm_sq(f)?.sqrt())
    }

    /// Applies the kernel to every row of `funcs` (rows are grid functions).
    pub fn apply_rows(&self, funcs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(funcs.ncols())?;
        let n = funcs.ncols();
        let mut out = Array2::<f64>::zeros(funcs.raw_dim());
        out.axis_iter_mut(ndarray::Axis(0))
            .into_par_iter()
            .zip(funcs.axis_iter(ndarray::Axis(0)).into_par_iter())
            .for_each_init(
                || vec![Complex64::default(); n],
                |buf, (mut dest, src)| {
                    for (slot, &v) in buf.iter_mut().zip(src.iter()) {
                        *slot = Complex64::new(v, 0.0);
                    }
                    self.fft.forward(buf);
                    for (z, &m) in buf.iter_mut().zip(&self.multipliers) {
                        *z *= m;
                    }
                    self.fft.inverse(buf);
                    for (slot, z) in dest.iter_mut().zip(buf.iter()) {
                        *slot = z.re;
                    }
                },
            );
        Ok(out)
    }

    /// Pairwise interaction matrix `V[a, b] = <rows_a, K rows_b>` for the
    /// rows of `funcs`, symmetrized explicitly.
    pub fn interaction_matrix(&self, funcs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let applied = self.apply_rows(funcs)?;
        let h = self.grid.cell_volume();
        let mut v = funcs.dot(&applied.t());
        v *= h;
        for a in 0..v.nrows() {
            for b in 0..a {
                let s = 0.5 * (v[(a, b)] + v[(b, a)]);
                v[(a, b)] = s;
                v[(b, a)] = s;
            }
        }
        Ok(v)
    }
}

/// Exact two-orbital repulsion integral `<ij|kl>` from the grid orbitals:
/// the interaction energy between pair densities `rho_ij` and `rho_kl`.
pub fn eri_exact(
    kernel: &CoulombKernel,
    orbitals: &OrbitalSet,
    (i, j, k, l): (usize, usize, usize, usize),
) -> Result<f64> {
    if orbitals.grid() != kernel.grid() {
        return Err(Error::GridMismatch("orbitals and kernel use different grids"));
    }
    let (oi, oj) = (orbitals.orbital(i)?, orbitals.orbital(j)?);
    let (ok, ol) = (orbitals.orbital(k)?, orbitals.orbital(l)?);
    let rho_ij = Array1::from_iter(oi.iter().zip(oj.iter()).map(|(a, b)| a * b));
    let rho_kl = Array1::from_iter(ok.iter().zip(ol.iter()).map(|(a, b)| a * b));
    kernel.inner(rho_ij.view(), rho_kl.view())
}
