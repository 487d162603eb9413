//! Randomized column selection for orbital pair densities.
//!
//! The pair densities `rho_ij(x) = psi_i(x) psi_j(x)` form an `N^2 x n`
//! matrix over the grid whose columns are heavily redundant. This module
//! picks `N_aux` grid points (columns) and an interpolation matrix `P` such
//! that every pair density is reproduced from its values at those points:
//!
//! ```text
//! rho_ij(x) ~= sum_mu rho_ij(x_mu) P_mu(x)
//! ```
//!
//! Selection runs on a small sketch instead of the full pair matrix: each
//! pair row is scrambled by a random unit phase, mixed by an FFT along the
//! pair axis, and `min(r N, N^2)` of the mixed rows are kept (the subsampled
//! randomized Fourier projection of Woolfe, Liberty, Rokhlin & Tygert 2008).
//! A column-pivoted QR of the sketch then orders columns by importance; the
//! rank is cut where the diagonal falls below `epsilon * |R_11|`, and `P`
//! comes from back-substitution against the leading triangular block, never
//! an explicit inverse. Total cost is `O(n N^2 log N)` and the `N^2 x n`
//! pair matrix is never materialized.
//!
//! Determinism contract: all random draws (phases first, then the row
//! subsample) come from one seeded ChaCha stream before any parallel work;
//! parallel sections write disjoint outputs. Results are bitwise identical
//! for a fixed seed regardless of thread count.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::PeriodicGrid;
use crate::model::OrbitalSet;
use crate::qr::{self, PivotedQr};
use crate::tol;

/// Flat index of the ordered orbital pair `(i, j)` among `count^2` pairs.
pub fn pair_index(i: usize, j: usize, count: usize) -> usize {
    i * count + j
}

/// Lazy view of the `N^2 x n` pair-density matrix. Rows are formed on
/// demand; nothing is stored.
pub struct PairDensityView<'a> {
    orbitals: &'a OrbitalSet,
}

impl<'a> PairDensityView<'a> {
    pub fn new(orbitals: &'a OrbitalSet) -> Self {
        Self { orbitals }
    }

    pub fn pair_count(&self) -> usize {
        self.orbitals.count() * self.orbitals.count()
    }

    pub fn grid_points(&self) -> usize {
        self.orbitals.grid().len()
    }

    /// Row `pair` of the pair-density matrix: `rho_ij = psi_i .* psi_j` with
    /// `pair = i * N + j`.
    pub fn row(&self, pair: usize) -> Result<Array1<f64>> {
        let count = self.orbitals.count();
        if pair >= self.pair_count() {
            return Err(Error::OrbitalIndex {
                index: pair,
                count: self.pair_count(),
            });
        }
        let (i, j) = (pair / count, pair % count);
        let a = self.orbitals.orbital(i)?;
        let b = self.orbitals.orbital(j)?;
        Ok(Array1::from_iter(a.iter().zip(b.iter()).map(|(x, y)| x * y)))
    }
}

/// Row-subsampled randomized Fourier sketch of the pair-density matrix.
pub struct SketchMatrix {
    values: Array2<Complex64>, // retained_rows.len() x n, column-major
    retained_rows: Vec<usize>,
    pair_count: usize,
    r: usize,
    seed: u64,
}

impl SketchMatrix {
    pub fn values(&self) -> ArrayView2<'_, Complex64> {
        self.values.view()
    }

    /// Indices of the kept mixed rows, strictly increasing.
    pub fn retained_rows(&self) -> &[usize] {
        &self.retained_rows
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn oversampling(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Builds the sketch: unit phases `eta_I` on every pair row, an FFT along
/// the pair axis per grid column, and `min(r N, N^2)` kept rows (sampled
/// without replacement, stored sorted). Grid columns are processed in
/// parallel; each column's transform is independent, so the result does not
/// depend on the thread count.
pub fn sketch(orbitals: &OrbitalSet, r: usize, seed: u64) -> Result<SketchMatrix> {
    if r == 0 {
        return Err(Error::BadOversampling);
    }
    let count = orbitals.count();
    let n = orbitals.grid().len();
    let pairs = count * count;
    let keep = (r * count).min(pairs);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let phases: Vec<Complex64> = (0..pairs)
        .map(|_| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.gen::<f64>()))
        .collect();
    let retained_rows: Vec<usize> = if keep < pairs {
        let mut idx = rand::seq::index::sample(&mut rng, pairs, keep).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..pairs).collect()
    };

    // per-point orbital values, contiguous per grid point
    let transposed: Array2<f64> = orbitals.values().t().to_owned();
    let plan = fft::forward_plan(pairs);
    let scratch_len = plan.get_inplace_scratch_len();

    let mut flat = vec![Complex64::default(); keep * n];
    flat.par_chunks_exact_mut(keep)
        .enumerate()
        .for_each_init(
            || (vec![Complex64::default(); pairs], vec![Complex64::default(); scratch_len]),
            |(buf, scratch), (g, out_col)| {
                let at_point = transposed.row(g);
                for i in 0..count {
                    let vi = at_point[i];
                    let row = &mut buf[i * count..(i + 1) * count];
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot = phases[i * count + j] * (vi * at_point[j]);
                    }
                }
                plan.process_with_scratch(buf, scratch);
                for (slot, &row) in out_col.iter_mut().zip(&retained_rows) {
                    *slot = buf[row];
                }
            },
        );

    let values = Array2::from_shape_vec((keep, n).f(), flat).expect("column-major sketch layout");
    Ok(SketchMatrix {
        values,
        retained_rows,
        pair_count: pairs,
        r,
        seed,
    })
}

/// Full column-pivoted QR of the sketch. [`compress`] uses an early-stopped
/// factorization instead; the kept rows agree bitwise.
pub fn pivoted_qr(sketch: &SketchMatrix) -> PivotedQr {
    qr::pivoted_qr(sketch.values(), 0.0)
}

/// Largest rank `k` with `|R_kk| >= epsilon * |R_11|`. Keeps everything when
/// no diagonal falls below the threshold.
pub fn select_rank(qr: &PivotedQr, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let diag = qr.diag();
    if diag.is_empty() || diag[0] <= 0.0 {
        return Err(Error::ZeroSketch);
    }
    let cut = epsilon * diag[0];
    match diag.iter().rposition(|&d| d >= cut) {
        Some(last) => Ok(last + 1),
        None => Err(Error::ZeroSketch), // diag[0] >= cut always; unreachable for finite input
    }
}

/// Selected grid points with their interpolation matrix.
pub struct InterpolativeBasis {
    grid: PeriodicGrid,
    selected_points: Vec<usize>,
    weights: Array2<f64>, // N_aux x n interpolation matrix P
    epsilon: f64,
    imag_rel: f64,
}

impl InterpolativeBasis {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Grid-point indices of the auxiliary basis, in pivot order.
    pub fn selected_points(&self) -> &[usize] {
        &self.selected_points
    }

    pub fn rank(&self) -> usize {
        self.selected_points.len()
    }

    /// Interpolation matrix `P` (`N_aux x n`, original column order).
    /// `P[:, selected_points]` is the identity.
    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Threshold that produced this rank.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Relative Frobenius norm of the imaginary part discarded when `P` was
    /// realified. Sits around 2e-2 in normal operation; values beyond
    /// [`tol::IMAG_WARN_REL`] are logged as warnings by [`compress`].
    pub fn imag_rel(&self) -> f64 {
        self.imag_rel
    }
}

/// Forms `P = R_11^{-1} R_{1:N_aux,:} E^{-1}` by back-substitution against
/// the leading triangular block, takes the real part, and records how much
/// imaginary residue was discarded. `epsilon` is carried through for
/// reporting only.
pub fn interpolation_basis(
    qr: &PivotedQr,
    n_aux: usize,
    grid: PeriodicGrid,
    epsilon: f64,
) -> Result<InterpolativeBasis> {
    if n_aux == 0 || n_aux > qr.steps() {
        return Err(Error::RankOutOfRange {
            requested: n_aux,
            available: qr.steps(),
        });
    }
    if grid.len() != qr.cols() {
        return Err(Error::GridMismatch("QR columns must count grid points"));
    }
    let diag = qr.diag();
    let ratio = diag[n_aux - 1] / diag[0];
    if !(ratio >= tol::SINGULAR_BLOCK_REL) {
        return Err(Error::SingularBlock { step: n_aux, ratio });
    }

    let r = qr.r();
    let n = qr.cols();
    // per column j: back-substitute R11 x = R[..n_aux, j] (column sweeps,
    // reading only column l of R at sweep l)
    let columns: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut x: Vec<Complex64> = (0..n_aux).map(|i| r[(i, j)]).collect();
            for l in (0..n_aux).rev() {
                let xl = x[l] / r[(l, l)];
                x[l] = xl;
                if xl != Complex64::default() {
                    for i in 0..l {
                        x[i] -= r[(i, l)] * xl;
                    }
                }
            }
            let imag_sq: f64 = x.iter().map(|z| z.im * z.im).sum();
            (x.into_iter().map(|z| z.re).collect(), imag_sq)
        })
        .collect();

    let mut weights = Array2::<f64>::zeros((n_aux, n));
    let mut imag_sq = 0.0f64;
    let mut real_sq = 0.0f64;
    for (j, (col, col_imag_sq)) in columns.iter().enumerate() {
        let dest = qr.pivots()[j];
        for (i, &v) in col.iter().enumerate() {
            weights[(i, dest)] = v;
            real_sq += v * v;
        }
        imag_sq += col_imag_sq;
    }
    let imag_rel = (imag_sq / real_sq).sqrt();

    Ok(InterpolativeBasis {
        grid,
        selected_points: qr.pivots()[..n_aux].to_vec(),
        weights,
        epsilon,
        imag_rel,
    })
}

/// Wall-clock seconds spent in each compression stage.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompressTimings {
    pub sketch_s: f64,
    pub qr_s: f64,
    pub basis_s: f64,
}

impl CompressTimings {
    pub fn total(&self) -> f64 {
        self.sketch_s + self.qr_s + self.basis_s
    }
}

/// Output of the full compression pipeline.
pub struct Compressed {
    pub basis: InterpolativeBasis,
    /// Diagonal magnitudes of the pivoted QR, for rank-decay diagnostics.
    pub diag: Vec<f64>,
    pub timings: CompressTimings,
}

/// Runs sketch, early-stopped pivoted QR, rank selection, and basis
/// construction. The factorization stops at the first diagonal below
/// `epsilon * |R_11|`, which leaves the selected points and `P` bitwise
/// identical to a run of the full factorization.
pub fn compress(orbitals: &OrbitalSet, epsilon: f64, r: usize, seed: u64) -> Result<Compressed> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let grid = orbitals.grid();

    let start = Instant::now();
    let sk = sketch(orbitals, r, seed)?;
    let sketch_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let rows = sk.retained_rows.len();
    let cols = grid.len();
    let (flat, offset) = sk.values.into_raw_vec_and_offset();
    debug_assert_eq!(offset, Some(0));
    let (qr, _) = qr::factor_vec(flat, rows, cols, epsilon, false);
    let qr_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let n_aux = select_rank(&qr, epsilon)?;
    let basis = interpolation_basis(&qr, n_aux, grid, epsilon)?;
    let basis_s = start.elapsed().as_secs_f64();

    if basis.imag_rel > tol::IMAG_WARN_REL {
        log::warn!(
            "interpolation matrix dropped a large imaginary part ({:.3e} relative)",
            basis.imag_rel
        );
    }

    Ok(Compressed {
        diag: qr.diag().to_vec(),
        basis,
        timings: CompressTimings {
            sketch_s,
            qr_s,
            basis_s,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_potential, solve_orbitals};
    use ndarray::array;

    fn small_orbitals(m: usize, count: usize, seed: u64) -> OrbitalSet {
        let grid = PeriodicGrid::new(1, m).unwrap();
        let pot = random_potential(grid, 3, 40.0, seed).unwrap();
        solve_orbitals(&pot, count).unwrap()
    }

    #[test]
    fn pair_rows_are_orbital_products() {
        let orbitals = small_orbitals(16, 2, 1);
        let view = PairDensityView::new(&orbitals);
        assert_eq!(view.pair_count(), 4);
        let row = view.row(pair_index(0, 1, 2)).unwrap();
        let a = orbitals.orbital(0).unwrap();
        let b = orbitals.orbital(1).unwrap();
        for g in 0..16 {
            assert_eq!(row[g], a[g] * b[g]);
        }
        assert!(view.row(4).is_err());
    }

    #[test]
    fn sketch_matches_the_direct_projection_sum() {
        let orbitals = small_orbitals(8, 3, 5);
        let seed = 42;
        let sk = sketch(&orbitals, 2, seed).unwrap();
        assert_eq!(sk.values().nrows(), 6); // min(2*3, 9)

        // replay the phase stream the sketch drew
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let phases: Vec<Complex64> = (0..9)
            .map(|_| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.gen::<f64>()))
            .collect();

        let view = PairDensityView::new(&orbitals);
        let rows: Vec<Array1<f64>> = (0..9).map(|p| view.row(p).unwrap()).collect();
        for (out_row, &xi) in sk.retained_rows().iter().enumerate() {
            for g in 0..8 {
                let mut acc = Complex64::default();
                for (pair, rho) in rows.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * (pair as f64) * (xi as f64) / 9.0;
                    acc += Complex64::from_polar(1.0, angle) * phases[pair] * rho[g];
                }
                let got = sk.values()[(out_row, g)];
                assert!(
                    (acc - got).norm() < 1e-11,
                    "row {xi} col {g}: direct {acc} vs fft {got}"
                );
            }
        }
    }

    #[test]
    fn sketch_keeps_sorted_unique_rows_and_is_deterministic() {
        let orbitals = small_orbitals(32, 4, 9);
        let a = sketch(&orbitals, 2, 7).unwrap();
        assert_eq!(a.values().nrows(), 8);
        for w in a.retained_rows().windows(2) {
            assert!(w[0] < w[1], "rows must be strictly increasing");
        }
        let b = sketch(&orbitals, 2, 7).unwrap();
        assert_eq!(a.values().to_owned(), b.values().to_owned());
        assert_eq!(a.retained_rows(), b.retained_rows());
        let c = sketch(&orbitals, 2, 8).unwrap();
        assert!(a.values().iter().zip(c.values().iter()).any(|(x, y)| x != y));
    }

    #[test]
    fn single_orbital_sketch_is_a_phase_times_the_density() {
        let orbitals = small_orbitals(16, 1, 3);
        let sk = sketch(&orbitals, 20, 11).unwrap();
        assert_eq!(sk.values().nrows(), 1);
        let rho = PairDensityView::new(&orbitals).row(0).unwrap();
        for g in 0..16 {
            assert!((sk.values()[(0, g)].norm() - rho[g].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn oversampling_zero_is_rejected() {
        let orbitals = small_orbitals(16, 2, 1);
        assert!(matches!(sketch(&orbitals, 0, 1), Err(Error::BadOversampling)));
    }

    #[test]
    fn select_rank_validates_and_cuts() {
        let orbitals = small_orbitals(32, 4, 2);
        let qr = pivoted_qr(&sketch(&orbitals, 20, 2).unwrap());
        assert!(matches!(select_rank(&qr, 0.0), Err(Error::BadEpsilon(_))));
        assert!(matches!(select_rank(&qr, 1.0), Err(Error::BadEpsilon(_))));
        let k = select_rank(&qr, 1e-6).unwrap();
        assert!(k >= 1 && k <= qr.steps());
        assert!(qr.diag()[k - 1] >= 1e-6 * qr.diag()[0]);
        if k < qr.steps() {
            assert!(qr.diag()[k] < 1e-6 * qr.diag()[0]);
        }
    }

    #[test]
    fn select_rank_keeps_everything_above_threshold() {
        // orthogonal columns of equal norm: every diagonal equals |R_11|
        let eye = array![
            [Complex64::new(2., 0.), Complex64::new(0., 0.)],
            [Complex64::new(0., 0.), Complex64::new(2., 0.)]
        ];
        let qr = qr::pivoted_qr(eye.view(), 0.0);
        assert_eq!(select_rank(&qr, 0.5).unwrap(), 2);
    }

    #[test]
    fn zero_sketch_is_reported() {
        let zero = Array2::<Complex64>::zeros((3, 4));
        let qr = qr::pivoted_qr(zero.view(), 0.0);
        assert!(matches!(select_rank(&qr, 1e-5), Err(Error::ZeroSketch)));
    }

    #[test]
    fn interpolation_identity_on_selected_columns() {
        let orbitals = small_orbitals(64, 6, 4);
        let out = compress(&orbitals, 1e-6, 20, 4).unwrap();
        let p = out.basis.weights();
        for (mu, &point) in out.basis.selected_points().iter().enumerate() {
            for row in 0..out.basis.rank() {
                let expected = if row == mu { 1.0 } else { 0.0 };
                assert!(
                    (p[(row, point)] - expected).abs() <= 1e-12,
                    "P[{row}, sel {mu}] = {}",
                    p[(row, point)]
                );
            }
        }
    }

    #[test]
    fn compress_equals_the_unstopped_pipeline() {
        let orbitals = small_orbitals(32, 4, 6);
        let eps = 1e-5;
        let fast = compress(&orbitals, eps, 20, 6).unwrap();
        let full_qr = pivoted_qr(&sketch(&orbitals, 20, 6).unwrap());
        let n_aux = select_rank(&full_qr, eps).unwrap();
        let slow = interpolation_basis(&full_qr, n_aux, orbitals.grid(), eps).unwrap();
        assert_eq!(fast.basis.selected_points(), slow.selected_points());
        assert_eq!(fast.basis.weights().to_owned(), slow.weights().to_owned());
    }

    #[test]
    fn exact_low_rank_input_recovers_the_rank() {
        // free particle, two orbitals: pair densities span exactly three
        // functions (1, cos, cos^2 mixtures)
        let grid = PeriodicGrid::new(1, 16).unwrap();
        let pot = random_potential(grid, 0, 0.0, 0).unwrap();
        let orbitals = solve_orbitals(&pot, 2).unwrap();
        let out = compress(&orbitals, 1e-8, 20, 1).unwrap();
        assert_eq!(out.basis.rank(), 3, "diag profile: {:?}", out.diag);

        // and the interpolation reproduces every pair density
        let view = PairDensityView::new(&orbitals);
        for pair in 0..4 {
            let rho = view.row(pair).unwrap();
            let fit = reconstruct(&out.basis, &rho);
            for g in 0..16 {
                assert!(
                    (rho[g] - fit[g]).abs() < 1e-10,
                    "pair {pair} point {g}: {} vs {}",
                    rho[g],
                    fit[g]
                );
            }
        }
    }

    fn reconstruct(basis: &InterpolativeBasis, rho: &Array1<f64>) -> Array1<f64> {
        let at_selected = Array1::from_iter(basis.selected_points().iter().map(|&p| rho[p]));
        at_selected.dot(&basis.weights())
    }

    #[test]
    fn rank_grows_as_epsilon_tightens() {
        let orbitals = small_orbitals(64, 6, 8);
        let mut last = 0;
        for eps in [1e-2, 1e-4, 1e-6] {
            let rank = compress(&orbitals, eps, 20, 8).unwrap().basis.rank();
            assert!(rank >= last, "rank must not shrink: {last} -> {rank}");
            last = rank;
        }
    }

    #[test]
    fn singular_leading_block_is_rejected() {
        let a = array![
            [Complex64::new(1., 0.), Complex64::new(0., 0.)],
            [Complex64::new(0., 0.), Complex64::new(1e-20, 0.)]
        ];
        let grid = PeriodicGrid::new(1, 2).unwrap();
        let qr = qr::pivoted_qr(a.view(), 0.0);
        assert!(matches!(
            interpolation_basis(&qr, 2, grid, 1e-5),
            Err(Error::SingularBlock { step: 2, .. })
        ));
    }

    #[test]
    fn basis_rank_bounds_are_checked() {
        let orbitals = small_orbitals(16, 2, 1);
        let qr = pivoted_qr(&sketch(&orbitals, 20, 1).unwrap());
        let grid = orbitals.grid();
        assert!(matches!(
            interpolation_basis(&qr, 0, grid, 1e-5),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            interpolation_basis(&qr, qr.steps() + 1, grid, 1e-5),
            Err(Error::RankOutOfRange { .. })
        ));
        let wrong_grid = PeriodicGrid::new(1, 32).unwrap();
        assert!(matches!(
            interpolation_basis(&qr, 1, wrong_grid, 1e-5),
            Err(Error::GridMismatch(_))
        ));
    }
}
