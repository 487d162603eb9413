//! Model problem: the lowest eigenpairs of a one-particle Hamiltonian
//! `H = -(1/2) laplacian + V` on a periodic grid, with a random band-limited
//! potential `V`.
//!
//! The Laplacian is spectral: mode `k` carries eigenvalue `-|2 pi k|^2`.
//! `H` is assembled densely through the translation-invariant stencil
//! `t = idft((1/2) |2 pi k|^2)`, so `H[g, g'] = t[g - g'] + V[g] delta`, and
//! diagonalized with LAPACK. Orbitals are normalized in the quadrature sense
//! `h * sum_x psi_i(x)^2 = 1` and sign-fixed so results are reproducible.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::grid::PeriodicGrid;

/// Real scalar field on a grid, used as the external potential.
#[derive(Clone, Debug)]
pub struct Potential {
    grid: PeriodicGrid,
    values: Array1<f64>,
}

impl Potential {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }
}

/// Canonical representatives of conjugate mode pairs, ordered by `|k|^2`
/// with ties broken by the lexicographic order of the wave-number tuple.
/// The zero mode and any mode touching the unpaired Nyquist bin are skipped.
fn canonical_mode_pairs(grid: PeriodicGrid) -> Vec<([i64; 3], usize)> {
    let nyquist = -((grid.points_per_axis() / 2) as i64);
    let mut reps: Vec<(i64, [i64; 3], usize)> = Vec::new();
    for idx in 0..grid.len() {
        let k = grid.wave_number(idx);
        if k == [0, 0, 0] || k.contains(&nyquist) {
            continue;
        }
        match k.iter().find(|&&c| c != 0) {
            Some(&first) if first > 0 => reps.push((grid.mode_norm_sq(idx), k, idx)),
            _ => {}
        }
    }
    reps.sort_by_key(|&(norm2, k, _)| (norm2, k));
    reps.into_iter().map(|(_, k, idx)| (k, idx)).collect()
}

/// Number of conjugate mode pairs available for [`random_potential`].
pub fn max_random_modes(grid: PeriodicGrid) -> usize {
    canonical_mode_pairs(grid).len()
}

/// Draws a random band-limited potential: the `num_modes` lowest nonzero
/// conjugate mode pairs get i.i.d. complex-normal Fourier coefficients
/// (independent real and imaginary parts), with conjugate symmetry enforced
/// so the field is real with exact zero mean.
///
/// `amplitude` sets the strength of the field itself: coefficients are drawn
/// with standard deviation `amplitude / (2 sqrt(num_modes))` per component,
/// which makes the pointwise standard deviation of `V` equal to `amplitude`
/// in expectation, independent of `num_modes`. (Each conjugate pair
/// contributes `2 Re(c_k e^{2 pi i k x})` with variance `4 sigma^2`.)
///
/// The coefficients are those of the synthesis `V(x) = sum_k c_k e^{2 pi i k x}`.
/// All draws come from a seeded ChaCha stream in mode order, so the result
/// is reproducible across platforms and thread counts.
pub fn random_potential(
    grid: PeriodicGrid,
    num_modes: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Potential> {
    let pairs = canonical_mode_pairs(grid);
    if num_modes > pairs.len() {
        return Err(Error::TooManyModes {
            requested: num_modes,
            available: pairs.len(),
        });
    }
    let n = grid.len();
    let mut spectrum = vec![Complex64::default(); n];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sigma = if num_modes == 0 {
        0.0
    } else {
        amplitude / (2.0 * (num_modes as f64).sqrt())
    };
    for &(k, idx) in &pairs[..num_modes] {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let c = Complex64::new(re, im) * sigma;
        spectrum[idx] = c;
        spectrum[grid.flatten([-k[0], -k[1], -k[2]])] = c.conj();
    }
    let fft = GridFft::new(grid);
    fft.inverse(&mut spectrum);
    // synthesis is the unnormalized inverse sum; undo the 1/n of `inverse`
    let scale = n as f64;
    let values = Array1::from_iter(spectrum.iter().map(|z| z.re * scale));
    Ok(Potential { grid, values })
}

/// Dense Hamiltonian `-(1/2) laplacian + V`, exactly symmetric.
pub fn hamiltonian(potential: &Potential) -> Array2<f64> {
    let grid = potential.grid;
    let n = grid.len();
    let m = grid.points_per_axis();
    let mut stencil: Vec<Complex64> = (0..n)
        .map(|i| {
            let k2 = grid.mode_norm_sq(i) as f64;
            Complex64::new(2.0 * std::f64::consts::PI.powi(2) * k2, 0.0)
        })
        .collect();
    GridFft::new(grid).inverse(&mut stencil);
    let t: Vec<f64> = stencil.iter().map(|z| z.re).collect();

    let mut h = Array2::<f64>::zeros((n, n));
    if grid.dim() == 1 {
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = t[(n + i - j) % n];
            }
        }
    } else {
        let axes: Vec<[usize; 3]> = (0..n).map(|g| grid.decompose(g)).collect();
        for i in 0..n {
            let [ax, ay, az] = axes[i];
            for j in 0..n {
                let [bx, by, bz] = axes[j];
                let d = ((m + ax - bx) % m * m + (m + ay - by) % m) * m + (m + az - bz) % m;
                h[(i, j)] = t[d];
            }
        }
    }
    for (g, &v) in potential.values.iter().enumerate() {
        h[(g, g)] += v;
    }
    // the stencil lookup is symmetric only up to FFT roundoff; make it exact
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = avg;
            h[(j, i)] = avg;
        }
    }
    h
}

/// The `count` lowest-energy orbitals of the Hamiltonian for `potential`.
#[derive(Clone, Debug)]
pub struct OrbitalSet {
    grid: PeriodicGrid,
    energies: Array1<f64>,
    values: Array2<f64>, // row i = orbital i on the grid
}

impl OrbitalSet {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn count(&self) -> usize {
        self.values.nrows()
    }

    pub fn energies(&self) -> ArrayView1<'_, f64> {
        self.energies.view()
    }

    /// Orbital values, one row per orbital, `count x n`.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn orbital(&self, i: usize) -> Result<ArrayView1<'_, f64>> {
        if i >= self.count() {
            return Err(Error::OrbitalIndex {
                index: i,
                count: self.count(),
            });
        }
        Ok(self.values.row(i))
    }

    /// The `count` lowest orbitals of this set as a new set. Eigenpairs are
    /// unchanged, so this equals a fresh solve asking for fewer orbitals.
    pub fn leading(&self, count: usize) -> Result<OrbitalSet> {
        if count == 0 || count > self.count() {
            return Err(Error::TooManyOrbitals {
                requested: count,
                available: self.count(),
            });
        }
        Ok(OrbitalSet {
            grid: self.grid,
            energies: self.energies.slice(s![..count]).to_owned(),
            values: self.values.slice(s![..count, ..]).to_owned(),
        })
    }
}

/// Solves for the `count` lowest eigenpairs of the dense Hamiltonian.
///
/// Orbitals are scaled by `sqrt(n)` so that `h * sum_x psi_i(x)^2 = 1`, and
/// the sign is fixed by making the first entry of largest magnitude positive.
pub fn solve_orbitals(potential: &Potential, count: usize) -> Result<OrbitalSet> {
    let grid = potential.grid;
    let n = grid.len();
    if count == 0 || count > n {
        return Err(Error::TooManyOrbitals {
            requested: count,
            available: n,
        });
    }
    let h = hamiltonian(potential);
    let (vals, vecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(e.to_string()))?;

    let scale = (n as f64).sqrt();
    let mut values = Array2::<f64>::zeros((count, n));
    for i in 0..count {
        let col = vecs.column(i);
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for (g, &v) in col.iter().enumerate() {
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = g;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for (g, &v) in col.iter().enumerate() {
            values[(i, g)] = sign * scale * v;
        }
    }
    Ok(OrbitalSet {
        grid,
        energies: vals.slice(s![..count]).to_owned(),
        values,
    })
}
