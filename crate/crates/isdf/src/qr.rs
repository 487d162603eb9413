//! Column-pivoted Householder QR for dense complex matrices.
//!
//! Each step picks the remaining column of largest 2-norm (ties: leftmost
//! active position), reflects it onto the diagonal, and downdates the
//! trailing column norms with the usual cancellation guard that recomputes a
//! norm exactly once it has shrunk past `sqrt(machine epsilon)` of its last
//! reference value (see Golub & Van Loan, "Matrix Computations", sec. 5.4).
//!
//! The reflectors are the Hermitian involutions `U = I - c u u^H` with
//! `u = x - beta e1`, `beta = -phase(x_1) * |x|`, `c = 2 / |u|^2`, so applying
//! `U` and `U^H` is the same operation and `Q = U_0 U_1 ... U_{s-1}`.
//!
//! Factorizations can stop early: once a diagonal magnitude falls below
//! `stop_rel * |R_11|` the current step is finished and the loop exits. The
//! first `s` rows of `R`, the first `s` pivots, and the diagonal magnitudes
//! are bitwise identical to a full factorization truncated to `s` steps,
//! because later steps never touch earlier rows.

use ndarray::{s, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;
use rayon::prelude::*;

/// Trailing-update work below which the per-column loop runs sequentially.
/// Outputs are bitwise identical either way; this is purely a latency knob.
const PAR_MIN_WORK: usize = 1 << 14;

fn nrm2(xs: &[Complex64]) -> f64 {
    xs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trimmed result of a column-pivoted QR factorization.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    r: Array2<Complex64>, // steps x cols, upper-trapezoidal, columns in pivot order
    pivots: Vec<usize>,
    diag: Vec<f64>,
    rows: usize,
}

impl PivotedQr {
    /// Factored rows of `R`; column `j` holds original column `pivots()[j]`.
    pub fn r(&self) -> ArrayView2<'_, Complex64> {
        self.r.view()
    }

    /// Permutation as an index list: position `j` holds original column
    /// `pivots()[j]`.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Diagonal magnitudes `|R_kk|`, one per completed step.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Number of completed elimination steps (rows of `R`).
    pub fn steps(&self) -> usize {
        self.diag.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.pivots.len()
    }
}

/// Householder reflectors accumulated during a factorization, kept so tests
/// and diagnostics can form `Q * X` without materializing `Q`.
pub struct HouseholderQ {
    rows: usize,
    reflectors: Vec<Vec<Complex64>>, // u for step k, length rows - k
    coeffs: Vec<f64>,                // 2 / |u|^2, 0 marks an identity step
}

impl HouseholderQ {
    /// Computes `Q * top`, padding `top` (steps x c) with zeros to full height.
    pub fn expand(&self, top: ArrayView2<'_, Complex64>) -> Array2<Complex64> {
        assert_eq!(top.nrows(), self.reflectors.len(), "row count must equal steps");
        let mut out = Array2::<Complex64>::zeros((self.rows, top.ncols()));
        out.slice_mut(s![..top.nrows(), ..]).assign(&top);
        for k in (0..self.reflectors.len()).rev() {
            let u = &self.reflectors[k];
            let c = self.coeffs[k];
            if c == 0.0 {
                continue;
            }
            for mut col in out.columns_mut() {
                let mut w = Complex64::default();
                for (ui, xi) in u.iter().zip(col.iter().skip(k)) {
                    w += ui.conj() * xi;
                }
                let step = w * c;
                for (ui, xi) in u.iter().zip(col.iter_mut().skip(k)) {
                    *xi -= step * ui;
                }
            }
        }
        out
    }
}

/// Factors a copy of `a`. `stop_rel = 0` runs to completion; a positive value
/// stops after the first step whose diagonal falls below `stop_rel * |R_11|`
/// (that step's row is still completed).
pub fn pivoted_qr(a: ArrayView2<'_, Complex64>, stop_rel: f64) -> PivotedQr {
    let (rows, cols) = a.dim();
    let mut data = vec![Complex64::default(); rows * cols];
    for (j, col) in a.columns().into_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            data[j * rows + i] = v;
        }
    }
    factor_vec(data, rows, cols, stop_rel, false).0
}

/// As [`pivoted_qr`], additionally returning the reflectors that form `Q`.
pub fn pivoted_qr_with_q(a: ArrayView2<'_, Complex64>, stop_rel: f64) -> (PivotedQr, HouseholderQ) {
    let (rows, cols) = a.dim();
    let mut data = vec![Complex64::default(); rows * cols];
    for (j, col) in a.columns().into_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            data[j * rows + i] = v;
        }
    }
    let (qr, q) = factor_vec(data, rows, cols, stop_rel, true);
    (qr, q.expect("requested reflectors"))
}

/// Core factorization on column-major storage (column `j` at `j*rows`).
pub(crate) fn factor_vec(
    mut data: Vec<Complex64>,
    rows: usize,
    cols: usize,
    stop_rel: f64,
    want_q: bool,
) -> (PivotedQr, Option<HouseholderQ>) {
    assert_eq!(data.len(), rows * cols);
    let mut pivots: Vec<usize> = (0..cols).collect();
    let mut vn1: Vec<f64> = (0..cols).map(|j| nrm2(&data[j * rows..(j + 1) * rows])).collect();
    let mut vn2 = vn1.clone();
    let tol3z = f64::EPSILON.sqrt();

    let mut diag: Vec<f64> = Vec::new();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut d1 = 0.0f64;

    for k in 0..rows.min(cols) {
        // pivot: largest remaining norm, leftmost on ties
        let mut best = k;
        let mut best_norm = vn1[k];
        for j in (k + 1)..cols {
            if vn1[j] > best_norm {
                best = j;
                best_norm = vn1[j];
            }
        }
        if best_norm <= 0.0 {
            break; // exact rank reached
        }
        if best != k {
            for i in 0..rows {
                data.swap(k * rows + i, best * rows + i);
            }
            vn1.swap(k, best);
            vn2.swap(k, best);
            pivots.swap(k, best);
        }

        let col_start = k * rows;
        let alpha = data[col_start + k];
        let tail_norm_sq: f64 = data[col_start + k + 1..col_start + rows]
            .iter()
            .map(|z| z.norm_sqr())
            .sum();

        let (beta, u0, coeff) = if tail_norm_sq == 0.0 {
            (alpha, Complex64::default(), 0.0)
        } else {
            let norm = (alpha.norm_sqr() + tail_norm_sq).sqrt();
            let phase = if alpha == Complex64::default() {
                Complex64::new(1.0, 0.0)
            } else {
                alpha / alpha.norm()
            };
            let beta = -phase * norm;
            let u0 = alpha - beta; // |u0| = |alpha| + norm, no cancellation
            (beta, u0, 2.0 / (u0.norm_sqr() + tail_norm_sq))
        };

        diag.push(beta.norm());
        if k == 0 {
            d1 = diag[0];
        }

        // apply the reflector to the trailing columns (row k of R included,
        // so an early stop still leaves every recorded row complete)
        if coeff != 0.0 && k + 1 < cols {
            let (head, tail) = data.split_at_mut((k + 1) * rows);
            let u_tail = &head[col_start + k + 1..col_start + rows];
            let update = |col: &mut [Complex64]| {
                let sub = &mut col[k..];
                let mut w = u0.conj() * sub[0];
                for (ui, xi) in u_tail.iter().zip(sub[1..].iter()) {
                    w += ui.conj() * xi;
                }
                let step = w * coeff;
                sub[0] -= step * u0;
                for (ui, xi) in u_tail.iter().zip(sub[1..].iter_mut()) {
                    *xi -= step * ui;
                }
            };
            if (cols - k - 1) * (rows - k) >= PAR_MIN_WORK {
                tail.par_chunks_exact_mut(rows).for_each(update);
            } else {
                tail.chunks_exact_mut(rows).for_each(update);
            }
        }
        if want_q {
            let mut u = Vec::with_capacity(rows - k);
            u.push(u0);
            u.extend_from_slice(&data[col_start + k + 1..col_start + rows]);
            reflectors.push(u);
            coeffs.push(coeff);
        }
        data[col_start + k] = beta;

        // norm downdates with the cancellation guard
        for j in (k + 1)..cols {
            if vn1[j] == 0.0 {
                continue;
            }
            let ratio = data[j * rows + k].norm() / vn1[j];
            let temp = ((1.0 - ratio) * (1.0 + ratio)).max(0.0);
            let temp2 = temp * (vn1[j] / vn2[j]).powi(2);
            if temp2 <= tol3z {
                vn1[j] = nrm2(&data[j * rows + k + 1..(j + 1) * rows]);
                vn2[j] = vn1[j];
            } else {
                vn1[j] *= temp.sqrt();
            }
        }

        if stop_rel > 0.0 && diag[k] < stop_rel * d1 {
            break;
        }
    }

    let steps = diag.len();
    let mut r = Array2::<Complex64>::zeros((steps, cols).f());
    for j in 0..cols {
        let filled = steps.min(j + 1);
        for i in 0..filled {
            r[(i, j)] = data[j * rows + i];
        }
    }
    let qr = PivotedQr {
        r,
        pivots,
        diag,
        rows,
    };
    let q = want_q.then_some(HouseholderQ {
        rows,
        reflectors,
        coeffs,
    });
    (qr, q)
}
