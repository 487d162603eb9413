//! Least-squares density-fitting baseline.
//!
//! Fits every pair density onto the span of the interpolation functions by
//! L2-optimal least squares — the classical density-fitting construction —
//! instead of reading coefficients off the selected points. Costs
//! `O(N^2 N_aux n)` against the selection pipeline's `O(n N^2 log N)`, which
//! is the cost gap the benchmark harness measures. The optimal residuals
//! also serve as a floor no interpolative fit can beat.
//!
//! Normal equations, with `h` the grid cell volume and `P` the `N_aux x n`
//! interpolation matrix:
//!
//! ```text
//! S = h P P',   B = h P rho',   coefficients = S^{-1} B
//! ```
//!
//! `S` inherits full rank from `P` (which contains an identity block), so a
//! failed factorization is pathological; one diagonally shifted retry is
//! attempted before giving up.

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::{Cholesky, Inverse, UPLO};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::interpolative::InterpolativeBasis;
use crate::model::OrbitalSet;
use crate::tol;

/// Pair rows per solve batch; keeps peak memory at a few chunk-rows of the
/// grid regardless of the orbital count.
const PAIR_CHUNK: usize = 256;

/// Least-squares fit of all `N^2` pair densities.
pub struct DfFit {
    /// Fit coefficients, `N^2 x N_aux`, pair index `i * N + j`.
    pub coefficients: Array2<f64>,
    /// Per-pair optimal L2 residual `h^{1/2} ||rho - fit||_2`.
    pub e2: Vec<f64>,
    /// Wall-clock seconds for the whole computation, residuals included.
    pub seconds: f64,
}

/// Inverse of the Gram matrix `h P P'`, with one shifted retry.
fn gram_inverse(weights: ArrayView2<'_, f64>, h: f64) -> Result<Array2<f64>> {
    let mut s = weights.dot(&weights.t());
    s *= h;
    for a in 0..s.nrows() {
        for b in 0..a {
            let v = 0.5 * (s[(a, b)] + s[(b, a)]);
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    let trace: f64 = s.diag().sum();
    let shift = tol::GRAM_SHIFT_REL * trace / s.nrows() as f64;
    if s.cholesky(UPLO::Lower).is_err() {
        log::warn!("gram matrix failed to factor; retrying with shift {shift:.3e}");
        s.diag_mut().map_inplace(|d| *d += shift);
        if s.cholesky(UPLO::Lower).is_err() {
            return Err(Error::GramNotPositive);
        }
    }
    let mut inv = s.inv().map_err(|_| Error::GramNotPositive)?;
    for a in 0..inv.nrows() {
        for b in 0..a {
            let v = 0.5 * (inv[(a, b)] + inv[(b, a)]);
            inv[(a, b)] = v;
            inv[(b, a)] = v;
        }
    }
    Ok(inv)
}

fn check_grids(orbitals: &OrbitalSet, basis: &InterpolativeBasis) -> Result<()> {
    if orbitals.grid() != basis.grid() {
        return Err(Error::GridMismatch("orbitals and basis use different grids"));
    }
    Ok(())
}

/// Full fit with residuals. Memory scales with `N^2 N_aux`, so this is for
/// problem sizes where the coefficient matrix is wanted; use
/// [`df_fit_seconds`] to only time the construction.
pub fn df_least_squares(orbitals: &OrbitalSet, basis: &InterpolativeBasis) -> Result<DfFit> {
    check_grids(orbitals, basis)?;
    let start = Instant::now();
    let count = orbitals.count();
    let pairs = count * count;
    let n = orbitals.grid().len();
    let h = orbitals.grid().cell_volume();
    let weights = basis.weights();
    let s_inv = gram_inverse(weights, h)?;

    let values = orbitals.values();
    let mut coefficients = Array2::<f64>::zeros((pairs, basis.rank()));
    let mut e2 = vec![0.0f64; pairs];
    let mut rho = Array2::<f64>::zeros((PAIR_CHUNK, n));
    for chunk_start in (0..pairs).step_by(PAIR_CHUNK) {
        let chunk = (pairs - chunk_start).min(PAIR_CHUNK);
        let mut rho = rho.slice_mut(ndarray::s![..chunk, ..]);
        for row in 0..chunk {
            let pair = chunk_start + row;
            let (i, j) = (pair / count, pair % count);
            let a = values.row(i);
            let b = values.row(j);
            for (slot, (x, y)) in rho.row_mut(row).iter_mut().zip(a.iter().zip(b.iter())) {
                *slot = x * y;
            }
        }
        let mut b = rho.dot(&weights.t());
        b *= h;
        let c = b.dot(&s_inv);
        let fitted = c.dot(&weights);
        for row in 0..chunk {
            let resid_sq: f64 = rho
                .row(row)
                .iter()
                .zip(fitted.row(row).iter())
                .map(|(r, f)| (r - f) * (r - f))
                .sum();
            e2[chunk_start + row] = (h * resid_sq).sqrt();
        }
        coefficients
            .slice_mut(ndarray::s![chunk_start..chunk_start + chunk, ..])
            .assign(&c);
    }

    Ok(DfFit {
        coefficients,
        e2,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Times the least-squares construction alone: Gram assembly and inversion
/// plus the coefficient solve for every pair, streamed in chunks with
/// nothing retained.
pub fn df_fit_seconds(orbitals: &OrbitalSet, basis: &InterpolativeBasis) -> Result<f64> {
    check_grids(orbitals, basis)?;
    let start = Instant::now();
    let count = orbitals.count();
    let pairs = count * count;
    let n = orbitals.grid().len();
    let h = orbitals.grid().cell_volume();
    let weights = basis.weights();
    let s_inv = gram_inverse(weights, h)?;

    let values = orbitals.values();
    let mut rho = Array2::<f64>::zeros((PAIR_CHUNK, n));
    let mut checksum = 0.0f64;
    for chunk_start in (0..pairs).step_by(PAIR_CHUNK) {
        let chunk = (pairs - chunk_start).min(PAIR_CHUNK);
        let mut rho = rho.slice_mut(ndarray::s![..chunk, ..]);
        for row in 0..chunk {
            let pair = chunk_start + row;
            let (i, j) = (pair / count, pair % count);
            let a = values.row(i);
            let b = values.row(j);
            for (slot, (x, y)) in rho.row_mut(row).iter_mut().zip(a.iter().zip(b.iter())) {
                *slot = x * y;
            }
        }
        let mut b = rho.dot(&weights.t());
        b *= h;
        let c = b.dot(&s_inv);
        checksum += c[(0, 0)]; // keep the solve observable
    }
    let elapsed = start.elapsed().as_secs_f64();
    log::debug!("baseline fit checksum {checksum:.6e}");
    Ok(elapsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::interpolative::compress;
    use crate::model::{random_potential, solve_orbitals};

    fn case(m: usize, count: usize, seed: u64, eps: f64) -> (OrbitalSet, InterpolativeBasis) {
        let grid = PeriodicGrid::new(1, m).unwrap();
        let pot = random_potential(grid, 3, 40.0, seed).unwrap();
        let orbitals = solve_orbitals(&pot, count).unwrap();
        let basis = compress(&orbitals, eps, 20, seed).unwrap().basis;
        (orbitals, basis)
    }

    #[test]
    fn residuals_are_orthogonal_to_the_basis() {
        // the defining property of a least-squares fit: <P_mu, resid>_h = 0
        let (orbitals, basis) = case(64, 3, 5, 1e-4);
        let fit = df_least_squares(&orbitals, &basis).unwrap();
        let h = orbitals.grid().cell_volume();
        let values = orbitals.values();
        for pair in 0..9 {
            let (i, j) = (pair / 3, pair % 3);
            let rho: Vec<f64> = values
                .row(i)
                .iter()
                .zip(values.row(j).iter())
                .map(|(a, b)| a * b)
                .collect();
            let fitted = fit.coefficients.row(pair).dot(&basis.weights());
            for mu in 0..basis.rank() {
                let dot: f64 = basis
                    .weights()
                    .row(mu)
                    .iter()
                    .zip(rho.iter().zip(fitted.iter()))
                    .map(|(p, (r, f))| p * (r - f))
                    .sum::<f64>()
                    * h;
                assert!(
                    dot.abs() < 1e-10,
                    "pair {pair}, basis row {mu}: residual projection {dot:.3e}"
                );
            }
        }
    }

    #[test]
    fn optimal_fit_is_never_worse_than_interpolation() {
        let (orbitals, basis) = case(128, 5, 9, 1e-4);
        let fit = df_least_squares(&orbitals, &basis).unwrap();
        let kernel = crate::coulomb::CoulombKernel::new(orbitals.grid());
        let values = orbitals.values();
        let factor = crate::thc::assemble_thc(&orbitals, &basis, &kernel).unwrap();
        let h = orbitals.grid().cell_volume();
        for pair in 0..25 {
            let (i, j) = (pair / 5, pair % 5);
            let fitted = factor.fitted_pair_density(&basis, i, j).unwrap();
            let interp_sq: f64 = values
                .row(i)
                .iter()
                .zip(values.row(j).iter())
                .zip(fitted.iter())
                .map(|((a, b), f)| (a * b - f) * (a * b - f))
                .sum();
            let interp_e2 = (h * interp_sq).sqrt();
            assert!(
                fit.e2[pair] <= interp_e2 * (1.0 + 1e-6) + 1e-12,
                "pair {pair}: optimal {:.3e} vs interpolative {:.3e}",
                fit.e2[pair],
                interp_e2
            );
        }
    }

    #[test]
    fn exact_rank_case_fits_to_roundoff() {
        let grid = PeriodicGrid::new(1, 16).unwrap();
        let pot = random_potential(grid, 0, 0.0, 0).unwrap();
        let orbitals = solve_orbitals(&pot, 2).unwrap();
        let basis = compress(&orbitals, 1e-10, 20, 1).unwrap().basis;
        let fit = df_least_squares(&orbitals, &basis).unwrap();
        for (pair, &e) in fit.e2.iter().enumerate() {
            assert!(e < 1e-12, "pair {pair}: residual {e:.3e}");
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let (orbitals, basis) = case(64, 4, 2, 1e-5);
        let a = df_least_squares(&orbitals, &basis).unwrap();
        let b = df_least_squares(&orbitals, &basis).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert_eq!(a.e2, b.e2);
    }

    #[test]
    fn timing_variant_runs_and_is_positive() {
        let (orbitals, basis) = case(64, 3, 4, 1e-4);
        let secs = df_fit_seconds(&orbitals, &basis).unwrap();
        assert!(secs > 0.0);
    }

    #[test]
    fn chunking_covers_a_non_multiple_pair_count() {
        // 7 orbitals: 49 pairs, alignment-free vs the chunk width
        let (orbitals, basis) = case(64, 7, 6, 1e-3);
        let fit = df_least_squares(&orbitals, &basis).unwrap();
        assert_eq!(fit.e2.len(), 49);
        assert_eq!(fit.coefficients.nrows(), 49);
        assert!(fit.e2.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn gram_inverse_rejects_a_hopeless_matrix() {
        // zero weights: S = 0, PSD but singular, shift cannot rescue rank
        let weights = Array2::<f64>::zeros((3, 8));
        let err = gram_inverse(weights.view(), 0.125);
        assert!(matches!(err, Err(Error::GramNotPositive)));
    }

    #[test]
    fn gram_inverse_matches_identity_weights() {
        // P = [I | 0]: S = h I, inverse = I / h
        let mut weights = Array2::<f64>::zeros((2, 8));
        weights[(0, 0)] = 1.0;
        weights[(1, 1)] = 1.0;
        let inv = gram_inverse(weights.view(), 0.125).unwrap();
        assert!((inv[(0, 0)] - 8.0).abs() < 1e-12);
        assert!((inv[(1, 1)] - 8.0).abs() < 1e-12);
        assert!(inv[(0, 1)].abs() < 1e-12);
    }
}
