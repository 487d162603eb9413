//! Invariant suites for the compression pipeline, exercised on random
//! inputs. These run in the normal test pass on every build.

use isdf::{
    assemble_thc, compress, df_least_squares, error_bound_check, error_metrics, eri_exact,
    interpolation_basis, pivoted_qr, pivoted_qr_with_q, random_potential, sample_quadruples,
    select_rank, sketch, solve_orbitals, CoulombKernel, OrbitalSet, PairSampling, PeriodicGrid,
};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use proptest::prelude::*;

fn orbitals_for(m: usize, count: usize, seed: u64) -> OrbitalSet {
    let grid = PeriodicGrid::new(1, m).unwrap();
    let pot = random_potential(grid, (m / 8).min(32), 100.0, seed).unwrap();
    solve_orbitals(&pot, count).unwrap()
}

// ---------------------------------------------------------------------------
// pivoted QR invariants on arbitrary complex matrices

fn complex_matrix() -> impl Strategy<Value = Array2<Complex64>> {
    (1usize..10, 1usize..14).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(
            move |vals| {
                Array2::from_shape_vec(
                    (rows, cols),
                    vals.into_iter().map(|(re, im)| Complex64::new(re, im)).collect(),
                )
                .unwrap()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn qr_diagonal_never_increases(a in complex_matrix()) {
        let qr = pivoted_qr(a.view(), 0.0);
        for w in qr.diag().windows(2) {
            prop_assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "diagonal rose: {} -> {}", w[0], w[1]
            );
        }
    }

    #[test]
    fn qr_reconstructs_the_permuted_input(a in complex_matrix()) {
        let (qr, q) = pivoted_qr_with_q(a.view(), 0.0);
        let rebuilt = q.expand(qr.r());
        let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-30);
        for (col, &piv) in qr.pivots().iter().enumerate() {
            for row in 0..a.nrows() {
                let err = (rebuilt[(row, col)] - a[(row, piv)]).norm();
                prop_assert!(
                    err <= 1e-12 * scale,
                    "entry ({row}, {col}): err {err:.3e} vs scale {scale:.3e}"
                );
            }
        }
    }

    #[test]
    fn rank_selection_shrinks_with_looser_epsilon(
        a in complex_matrix(),
        tight_exp in 4.0f64..12.0,
        gap in 0.5f64..4.0,
    ) {
        let qr = pivoted_qr(a.view(), 0.0);
        if qr.steps() == 0 {
            return Ok(()); // zero matrix: rank selection has nothing to cut
        }
        let tight = 10f64.powf(-tight_exp);
        let loose = (tight * 10f64.powf(gap)).min(0.5);
        let k_tight = select_rank(&qr, tight).unwrap();
        let k_loose = select_rank(&qr, loose).unwrap();
        prop_assert!(k_loose <= k_tight, "loose {k_loose} > tight {k_tight}");
        let diag = qr.diag();
        prop_assert!(diag[k_tight - 1] >= tight * diag[0]);
        if k_tight < qr.steps() {
            prop_assert!(diag[k_tight] < tight * diag[0]);
        }
    }
}

// ---------------------------------------------------------------------------
// Coulomb kernel algebra

fn grid_function(m: usize) -> impl Strategy<Value = Array1<f64>> {
    proptest::collection::vec(-2.0f64..2.0, m).prop_map(Array1::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_inner_is_symmetric_and_matches_norm(f in grid_function(16), g in grid_function(16)) {
        let kernel = CoulombKernel::new(PeriodicGrid::new(1, 16).unwrap());
        let fg = kernel.inner(f.view(), g.view()).unwrap();
        let gf = kernel.inner(g.view(), f.view()).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-14 * fg.abs().max(1.0));

        let direct = kernel.norm_sq(f.view()).unwrap();
        let via_inner = kernel.inner(f.view(), f.view()).unwrap();
        prop_assert!((direct - via_inner).abs() <= 1e-13 * direct.max(1e-30));
        prop_assert!(direct >= 0.0, "norm_sq went negative: {direct:.3e}");
    }

    #[test]
    fn kernel_is_linear(f in grid_function(16), g in grid_function(16), alpha in -3.0f64..3.0) {
        let kernel = CoulombKernel::new(PeriodicGrid::new(1, 16).unwrap());
        let combo = &f * alpha + &g;
        let lhs = kernel.apply(combo.view()).unwrap();
        let rhs = kernel.apply(f.view()).unwrap() * alpha + kernel.apply(g.view()).unwrap();
        let scale: f64 = lhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        for i in 0..16 {
            prop_assert!((lhs[i] - rhs[i]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn potential_scales_linearly_with_amplitude(amp in 0.1f64..50.0, seed in 0u64..500) {
        let grid = PeriodicGrid::new(1, 32).unwrap();
        let base = random_potential(grid, 6, 1.0, seed).unwrap();
        let scaled = random_potential(grid, 6, amp, seed).unwrap();
        for (b, s) in base.values().iter().zip(scaled.values()) {
            prop_assert!((b * amp - s).abs() <= 1e-12 * amp.max(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// interpolation and compression invariants on solved orbital sets

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interpolation_identity_block_is_exact(
        m_exp in 4u32..7,
        count in 2usize..6,
        seed in 0u64..1000,
    ) {
        let m = 1usize << m_exp;
        let orbitals = orbitals_for(m, count, seed);
        let out = compress(&orbitals, 1e-5, 20, seed).unwrap();
        let p = out.basis.weights();
        for (mu, &point) in out.basis.selected_points().iter().enumerate() {
            for row in 0..out.basis.rank() {
                let expected = if row == mu { 1.0 } else { 0.0 };
                prop_assert!(
                    (p[(row, point)] - expected).abs() <= 1e-12,
                    "P[{row}, selected {mu}] = {:.3e}", p[(row, point)]
                );
            }
        }
        // selected points are distinct grid indices
        let mut sorted = out.basis.selected_points().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), out.basis.rank());
    }

    #[test]
    fn core_is_symmetric_and_positive_semidefinite(
        count in 2usize..6,
        seed in 0u64..1000,
    ) {
        let orbitals = orbitals_for(64, count, seed);
        let basis = compress(&orbitals, 1e-6, 20, seed).unwrap().basis;
        let kernel = CoulombKernel::new(orbitals.grid());
        let factor = assemble_thc(&orbitals, &basis, &kernel).unwrap();
        let core = factor.core();
        for a in 0..core.nrows() {
            for b in 0..a {
                prop_assert_eq!(core[(a, b)], core[(b, a)], "core not exactly symmetric");
            }
        }
        let (eigs, _) = core.to_owned().eigh(UPLO::Lower).unwrap();
        let top = eigs.iter().cloned().fold(0.0f64, f64::max);
        let bottom = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(
            bottom >= -1e-10 * top.max(1e-30),
            "negative eigenvalue {bottom:.3e} against top {top:.3e}"
        );
    }
}

// ---------------------------------------------------------------------------
// fixed-seed suites: error bound, optimality, determinism

#[test]
fn cauchy_schwarz_bound_never_violated() {
    let orbitals = orbitals_for(256, 8, 21);
    let kernel = CoulombKernel::new(orbitals.grid());
    for eps in [1e-3, 1e-5] {
        let basis = compress(&orbitals, eps, 20, 21).unwrap().basis;
        let quads = sample_quadruples(8, 200, 99);
        assert_eq!(quads.len(), 200);
        let check = error_bound_check(&orbitals, &basis, &kernel, &quads).unwrap();
        assert_eq!(
            check.violations, 0,
            "epsilon {eps:.0e}: {} violations, min margin {:.3e}",
            check.violations, check.min_margin
        );
        assert!(check.min_margin >= 0.0);
    }
}

#[test]
fn least_squares_fit_dominates_interpolation_per_pair() {
    let orbitals = orbitals_for(128, 6, 13);
    let basis = compress(&orbitals, 1e-4, 20, 13).unwrap().basis;
    let kernel = CoulombKernel::new(orbitals.grid());
    let factor = assemble_thc(&orbitals, &basis, &kernel).unwrap();
    let optimal = df_least_squares(&orbitals, &basis).unwrap();
    let h = orbitals.grid().cell_volume();
    let values = orbitals.values();
    for pair in 0..36 {
        let (i, j) = (pair / 6, pair % 6);
        let fit = factor.fitted_pair_density(&basis, i, j).unwrap();
        let interp_sq: f64 = values
            .row(i)
            .iter()
            .zip(values.row(j).iter())
            .zip(fit.iter())
            .map(|((a, b), f)| (a * b - f) * (a * b - f))
            .sum();
        let interp_e2 = (h * interp_sq).sqrt();
        assert!(
            optimal.e2[pair] <= interp_e2 * (1.0 + 1e-6) + 1e-12,
            "pair {pair}: optimal {:.3e} beats interpolative {:.3e}?",
            optimal.e2[pair],
            interp_e2
        );
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let orbitals = orbitals_for(256, 8, 5);
    let kernel = CoulombKernel::new(orbitals.grid());

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let out = compress(&orbitals, 1e-6, 20, 5).unwrap();
            let report = error_metrics(&orbitals, &out.basis, &kernel, PairSampling::All).unwrap();
            (
                out.basis.selected_points().to_vec(),
                out.basis.weights().to_owned(),
                out.diag.clone(),
                report.max_e2,
                report.rel_c_error,
            )
        })
    };

    let single = run(1);
    let quad = run(4);
    assert_eq!(single.0, quad.0, "selected points differ across thread counts");
    assert_eq!(single.1, quad.1, "interpolation weights differ across thread counts");
    assert_eq!(single.2, quad.2, "pivot diagonals differ across thread counts");
    assert_eq!(single.3, quad.3, "max_e2 differs across thread counts");
    assert_eq!(single.4, quad.4, "rel_c_error differs across thread counts");
}

#[test]
fn compressed_integrals_commute_with_index_symmetries() {
    let orbitals = orbitals_for(128, 5, 3);
    let kernel = CoulombKernel::new(orbitals.grid());
    let basis = compress(&orbitals, 1e-5, 20, 3).unwrap().basis;
    let factor = assemble_thc(&orbitals, &basis, &kernel).unwrap();
    let quads = sample_quadruples(5, 40, 8);
    for (i, j, k, l) in quads {
        let base = factor.eri((i, j, k, l)).unwrap();
        for sym in [(j, i, k, l), (i, j, l, k), (k, l, i, j)] {
            let v = factor.eri(sym).unwrap();
            assert!(
                (v - base).abs() <= 1e-12 * base.abs().max(1.0),
                "({i},{j},{k},{l}) -> {sym:?}: {base} vs {v}"
            );
        }
    }
}

#[test]
fn sketch_rows_shrink_with_oversampling_and_stay_sorted() {
    let orbitals = orbitals_for(64, 5, 2);
    for (r, expect) in [(1, 5), (2, 10), (20, 25)] {
        let sk = sketch(&orbitals, r, 11).unwrap();
        assert_eq!(sk.values().nrows(), expect, "r = {r}");
        assert!(sk.retained_rows().windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn rank_selection_integrates_with_interpolation_bounds() {
    let orbitals = orbitals_for(64, 4, 17);
    let sk = sketch(&orbitals, 20, 17).unwrap();
    let qr = isdf::interpolative::pivoted_qr(&sk);
    let n_aux = select_rank(&qr, 1e-6).unwrap();
    let basis = interpolation_basis(&qr, n_aux, orbitals.grid(), 1e-6).unwrap();
    assert_eq!(basis.rank(), n_aux);
    assert_eq!(basis.selected_points(), &qr.pivots()[..n_aux]);
}

#[test]
fn exact_and_compressed_integrals_agree_on_an_easy_case() {
    let orbitals = orbitals_for(128, 4, 29);
    let kernel = CoulombKernel::new(orbitals.grid());
    let basis = compress(&orbitals, 1e-9, 20, 29).unwrap().basis;
    let factor = assemble_thc(&orbitals, &basis, &kernel).unwrap();
    for quad in sample_quadruples(4, 30, 2) {
        let exact = eri_exact(&kernel, &orbitals, quad).unwrap();
        let fitted = factor.eri(quad).unwrap();
        assert!(
            (exact - fitted).abs() <= 1e-6 * exact.abs().max(1e-6),
            "{quad:?}: {exact} vs {fitted}"
        );
    }
}
