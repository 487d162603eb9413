//! Hypercontracted representation of the repulsion tensor and its error
//! diagnostics.
//!
//! With `N_aux` selected grid points, interpolation matrix `P`, and
//! collocation values `X[i, mu] = psi_i(x_mu)`, every repulsion integral
//! collapses to
//!
//! ```text
//! <ij|kl> ~= sum_{mu nu} X[i,mu] X[j,mu] V[mu,nu] X[k,nu] X[l,nu]
//! ```
//!
//! where `V[mu,nu] = <P_mu, K P_nu>` is the interaction matrix of the
//! interpolation functions. The factor costs `O(N N_aux + N_aux^2)` to
//! store against `O(N^4)` for the dense tensor.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::time::Instant;

use crate::coulomb::CoulombKernel;
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::interpolative::InterpolativeBasis;
use crate::model::OrbitalSet;
use crate::tol;

/// Rows of pair densities processed per matrix product in the error sweep.
const PAIR_CHUNK: usize = 256;

/// The assembled hypercontraction factor.
pub struct ThcFactor {
    grid: PeriodicGrid,
    collocation: Array2<f64>, // N x N_aux, X[i, mu] = psi_i(x_mu)
    core: Array2<f64>,        // N_aux x N_aux, symmetric
    selected_points: Vec<usize>,
}

impl ThcFactor {
    /// Builds a factor from raw parts. `collocation` is `N x N_aux`, `core`
    /// is `N_aux x N_aux`, and `selected_points` names the grid point behind
    /// each auxiliary index.
    pub fn from_parts(
        grid: PeriodicGrid,
        collocation: Array2<f64>,
        core: Array2<f64>,
        selected_points: Vec<usize>,
    ) -> Result<Self> {
        let n_aux = selected_points.len();
        if collocation.ncols() != n_aux || core.nrows() != n_aux || core.ncols() != n_aux {
            return Err(Error::GridMismatch(
                "collocation and core must agree on the auxiliary count",
            ));
        }
        if let Some(&bad) = selected_points.iter().find(|&&p| p >= grid.len()) {
            return Err(Error::PointIndex {
                index: bad,
                count: grid.len(),
            });
        }
        Ok(Self {
            grid,
            collocation,
            core,
            selected_points,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn n_orbitals(&self) -> usize {
        self.collocation.nrows()
    }

    pub fn n_aux(&self) -> usize {
        self.selected_points.len()
    }

    /// Orbital values at the selected points, `N x N_aux`.
    pub fn collocation(&self) -> ArrayView2<'_, f64> {
        self.collocation.view()
    }

    /// Interaction matrix of the interpolation functions, `N_aux x N_aux`.
    pub fn core(&self) -> ArrayView2<'_, f64> {
        self.core.view()
    }

    pub fn selected_points(&self) -> &[usize] {
        &self.selected_points
    }

    fn pair_weights(&self, i: usize, j: usize) -> Result<Array1<f64>> {
        let n = self.n_orbitals();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::OrbitalIndex { index: idx, count: n });
            }
        }
        let xi = self.collocation.row(i);
        let xj = self.collocation.row(j);
        Ok(Array1::from_iter(xi.iter().zip(xj.iter()).map(|(a, b)| a * b)))
    }

    /// Compressed repulsion integral `<ij|kl>`.
    pub fn eri(&self, (i, j, k, l): (usize, usize, usize, usize)) -> Result<f64> {
        let left = self.pair_weights(i, j)?;
        let right = self.pair_weights(k, l)?;
        Ok(left.dot(&self.core.dot(&right)))
    }

    /// The fitted pair density `rho~_ij = sum_mu X[i,mu] X[j,mu] P_mu` on
    /// the full grid.
    pub fn fitted_pair_density(
        &self,
        basis: &InterpolativeBasis,
        i: usize,
        j: usize,
    ) -> Result<Array1<f64>> {
        if basis.selected_points() != self.selected_points.as_slice() {
            return Err(Error::GridMismatch(
                "basis and factor disagree on the selected points",
            ));
        }
        Ok(self.pair_weights(i, j)?.dot(&basis.weights()))
    }
}

/// Collocates the orbitals on the selected points and assembles the core
/// interaction matrix.
pub fn assemble_thc(
    orbitals: &OrbitalSet,
    basis: &InterpolativeBasis,
    kernel: &CoulombKernel,
) -> Result<ThcFactor> {
    if orbitals.grid() != basis.grid() {
        return Err(Error::GridMismatch("orbitals and basis use different grids"));
    }
    if kernel.grid() != basis.grid() {
        return Err(Error::GridMismatch("kernel and basis use different grids"));
    }
    let points = basis.selected_points();
    let mut collocation = Array2::<f64>::zeros((orbitals.count(), points.len()));
    for (i, mut row) in collocation.axis_iter_mut(Axis(0)).enumerate() {
        let orbital = orbitals.orbital(i)?;
        for (slot, &p) in row.iter_mut().zip(points) {
            *slot = orbital[p];
        }
    }
    let core = kernel.interaction_matrix(basis.weights())?;
    ThcFactor::from_parts(basis.grid(), collocation, core, points.to_vec())
}

/// Which orbital pairs an error sweep visits.
#[derive(Clone, Copy, Debug)]
pub enum PairSampling {
    /// Every ordered pair, `N^2` of them.
    All,
    /// A uniform sample without replacement, at most `count` pairs.
    Sample { count: usize, seed: u64 },
}

/// Residual statistics of the fitted pair densities.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub pairs_evaluated: usize,
    /// Largest quadrature-weighted L2 residual `h^{1/2} ||rho - rho~||_2`.
    pub max_e2: f64,
    /// Largest interaction-norm residual `||rho - rho~||_K`.
    pub max_ec: f64,
    pub mean_e2: f64,
    pub mean_ec: f64,
    /// `mean(e2) / mean(h^{1/2} ||rho||_2)` over the visited pairs.
    pub rel_2_error: f64,
    /// `mean(ec) / mean(||rho||_K)` over the visited pairs.
    pub rel_c_error: f64,
    pub seconds: f64,
}

fn sampled_pairs(n_pairs: usize, sampling: PairSampling) -> Result<Vec<usize>> {
    match sampling {
        PairSampling::All => Ok((0..n_pairs).collect()),
        PairSampling::Sample { count, seed } => {
            if count == 0 {
                return Err(Error::BadSampleCount {
                    requested: count,
                    available: n_pairs,
                });
            }
            if count >= n_pairs {
                return Ok((0..n_pairs).collect());
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n_pairs, count).into_vec();
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

/// Sweeps pair densities, fits each from its values at the selected points,
/// and accumulates residual statistics. Pairs are processed in fixed order
/// and reduced sequentially, so the report does not depend on the thread
/// count.
pub fn error_metrics(
    orbitals: &OrbitalSet,
    basis: &InterpolativeBasis,
    kernel: &CoulombKernel,
    sampling: PairSampling,
) -> Result<ErrorReport> {
    if orbitals.grid() != basis.grid() || kernel.grid() != basis.grid() {
        return Err(Error::GridMismatch("error sweep needs one shared grid"));
    }
    let start = Instant::now();
    let count = orbitals.count();
    let n = orbitals.grid().len();
    let h = orbitals.grid().cell_volume();
    let sqrt_h = h.sqrt();
    let pairs = sampled_pairs(count * count, sampling)?;

    // X[i, mu] once, pair rows on demand
    let points = basis.selected_points();
    let mut collocation = Array2::<f64>::zeros((count, points.len()));
    for (i, mut row) in collocation.axis_iter_mut(Axis(0)).enumerate() {
        let orbital = orbitals.orbital(i)?;
        for (slot, &p) in row.iter_mut().zip(points) {
            *slot = orbital[p];
        }
    }
    let weights = basis.weights();
    let values = orbitals.values();

    // per pair: (e2, ec, ||rho||_2 scaled, ||rho||_K)
    let mut stats: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(PAIR_CHUNK) {
        let mut pair_rows = Array2::<f64>::zeros((chunk.len(), basis.rank()));
        for (row, &pair) in chunk.iter().enumerate() {
            let (i, j) = (pair / count, pair % count);
            let xi = collocation.row(i);
            let xj = collocation.row(j);
            for (mu, slot) in pair_rows.row_mut(row).iter_mut().enumerate() {
                *slot = xi[mu] * xj[mu];
            }
        }
        let fitted = pair_rows.dot(&weights); // chunk x n

        let chunk_stats: Vec<(f64, f64, f64, f64)> = chunk
            .par_iter()
            .enumerate()
            .map_init(
                || vec![Complex64::default(); n],
                |buf, (row, &pair)| {
                    let (i, j) = (pair / count, pair % count);
                    let a = values.row(i);
                    let b = values.row(j);
                    let fit = fitted.row(row);
                    let mut resid_sq = 0.0f64;
                    let mut rho_sq = 0.0f64;
                    for g in 0..n {
                        let rho = a[g] * b[g];
                        let d = rho - fit[g];
                        resid_sq += d * d;
                        rho_sq += rho * rho;
                        buf[g] = Complex64::new(d, 0.0);
                    }
                    let ec_sq = kernel
                        .norm_sq_from_real(buf)
                        .expect("buffer sized to the grid");
                    let nc = {
                        for g in 0..n {
                            buf[g] = Complex64::new(a[g] * b[g], 0.0);
                        }
                        kernel
                            .norm_sq_from_real(buf)
                            .expect("buffer sized to the grid")
                            .sqrt()
                    };
                    (sqrt_h * resid_sq.sqrt(), ec_sq.sqrt(), sqrt_h * rho_sq.sqrt(), nc)
                },
            )
            .collect();
        stats.extend(chunk_stats);
    }

    let mut max_e2 = 0.0f64;
    let mut max_ec = 0.0f64;
    let (mut sum_e2, mut sum_ec, mut sum_n2, mut sum_nc) = (0.0f64, 0.0, 0.0, 0.0);
    for &(e2, ec, n2, nc) in &stats {
        max_e2 = max_e2.max(e2);
        max_ec = max_ec.max(ec);
        sum_e2 += e2;
        sum_ec += ec;
        sum_n2 += n2;
        sum_nc += nc;
    }
    let evaluated = stats.len() as f64;
    let (mean_n2, mean_nc) = (sum_n2 / evaluated, sum_nc / evaluated);
    if mean_n2 < tol::NORM_FLOOR || mean_nc < tol::NORM_FLOOR {
        return Err(Error::DegenerateNorm(mean_n2.min(mean_nc)));
    }

    Ok(ErrorReport {
        pairs_evaluated: stats.len(),
        max_e2,
        max_ec,
        mean_e2: sum_e2 / evaluated,
        mean_ec: sum_ec / evaluated,
        rel_2_error: (sum_e2 / evaluated) / mean_n2,
        rel_c_error: (sum_ec / evaluated) / mean_nc,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of checking the interaction-norm error bound on a set of
/// integrals.
#[derive(Clone, Copy, Debug)]
pub struct BoundCheck {
    pub quadruples: usize,
    /// Smallest `bound - |exact - compressed|`; negative means a violation.
    pub min_margin: f64,
    pub violations: usize,
}

/// Verifies, integral by integral, that the compression error respects the
/// Cauchy-Schwarz bound
/// `|<ij|kl> - <ij|kl>~| <= ||rho_ij||_K ec(kl) + ec(ij) ||rho~_kl||_K`
/// (plus a fixed absolute slack for floating-point noise).
pub fn error_bound_check(
    orbitals: &OrbitalSet,
    basis: &InterpolativeBasis,
    kernel: &CoulombKernel,
    quadruples: &[(usize, usize, usize, usize)],
) -> Result<BoundCheck> {
    let factor = assemble_thc(orbitals, basis, kernel)?;
    let values = orbitals.values();

    // one entry per distinct pair: (||rho||_K, ||rho~||_K, ec)
    let mut cache: std::collections::BTreeMap<(usize, usize), (f64, f64, f64)> =
        std::collections::BTreeMap::new();
    let mut pair_norms = |i: usize, j: usize| -> Result<(f64, f64, f64)> {
        if let Some(&hit) = cache.get(&(i, j)) {
            return Ok(hit);
        }
        let a = values.row(i);
        let b = values.row(j);
        let rho = Array1::from_iter(a.iter().zip(b.iter()).map(|(x, y)| x * y));
        let fit = factor.fitted_pair_density(basis, i, j)?;
        let resid = &rho - &fit;
        let entry = (
            kernel.norm_sq(rho.view())?.sqrt(),
            kernel.norm_sq(fit.view())?.sqrt(),
            kernel.norm_sq(resid.view())?.sqrt(),
        );
        cache.insert((i, j), entry);
        Ok(entry)
    };

    let mut min_margin = f64::INFINITY;
    let mut violations = 0usize;
    for &(i, j, k, l) in quadruples {
        let exact = crate::coulomb::eri_exact(kernel, orbitals, (i, j, k, l))?;
        let fitted = factor.eri((i, j, k, l))?;
        let (norm_ij, _, ec_ij) = pair_norms(i, j)?;
        let (_, fit_norm_kl, ec_kl) = pair_norms(k, l)?;
        let bound = norm_ij * ec_kl + ec_ij * fit_norm_kl + tol::BOUND_SLACK_ABS;
        let margin = bound - (exact - fitted).abs();
        min_margin = min_margin.min(margin);
        if margin < 0.0 {
            violations += 1;
        }
    }

    Ok(BoundCheck {
        quadruples: quadruples.len(),
        min_margin,
        violations,
    })
}

/// All ordered quadruples for `count` orbitals, `count^4` of them. Intended
/// for exhaustive checks at small sizes.
pub fn all_quadruples(count: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::with_capacity(count.pow(4));
    for i in 0..count {
        for j in 0..count {
            for k in 0..count {
                for l in 0..count {
                    out.push((i, j, k, l));
                }
            }
        }
    }
    out
}

/// A deterministic sample of ordered quadruples.
pub fn sample_quadruples(count: usize, how_many: usize, seed: u64) -> Vec<(usize, usize, usize, usize)> {
    let total = count.pow(4);
    let picks = if how_many >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, total, how_many).into_vec();
        idx.sort_unstable();
        idx
    };
    picks
        .into_iter()
        .map(|flat| {
            let l = flat % count;
            let k = (flat / count) % count;
            let j = (flat / (count * count)) % count;
            let i = flat / (count * count * count);
            (i, j, k, l)
        })
        .collect()
}
