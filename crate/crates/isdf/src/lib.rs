//! Compression of grid-discretized electron repulsion integrals by
//! randomized point selection.
//!
//! For `N` orbitals on an `n`-point periodic grid, the fourth-order
//! repulsion tensor `<ij|kl>` is determined by the `N^2` pair densities
//! `rho_ij = psi_i psi_j`, which are numerically very redundant. This crate
//! picks `N_aux = O(N)` grid points and an interpolation matrix so that
//! every integral collapses to a small two-index contraction (a tensor
//! hypercontraction), in `O(n N^2 log N)` time and without ever holding the
//! `N^2 x n` pair matrix in memory.
//!
//! The pieces, each usable on its own:
//!
//! * [`grid`]/[`model`] — periodic grids on the unit torus, band-limited
//!   random potentials, and their discrete eigenbases: a self-contained
//!   source of orbital sets for benchmarks.
//! * [`interpolative`] — the selection pipeline: randomized Fourier sketch,
//!   column-pivoted QR, and the interpolation matrix ([`compress`] runs all
//!   three).
//! * [`coulomb`] — the periodic interaction kernel, applied spectrally.
//! * [`thc`] — assembly of the compressed tensor, integral evaluation, and
//!   residual/error diagnostics.
//! * [`df`] — the classical least-squares fit onto the same functions, as
//!   a cost and accuracy baseline.
//! * [`qr`] — the underlying column-pivoted Householder factorization.
//!
//! Everything randomized takes an explicit seed, and results are bitwise
//! reproducible for a fixed seed regardless of how many threads run the
//! parallel sections.
//!
//! ```
//! use isdf::{CoulombKernel, PeriodicGrid};
//!
//! let grid = PeriodicGrid::new(1, 64)?;
//! let potential = isdf::random_potential(grid, 8, 100.0, 7)?;
//! let orbitals = isdf::solve_orbitals(&potential, 6)?;
//!
//! let compressed = isdf::compress(&orbitals, 1e-8, 20, 7)?;
//! let kernel = CoulombKernel::new(grid);
//! let factor = isdf::assemble_thc(&orbitals, &compressed.basis, &kernel)?;
//!
//! let exact = isdf::eri_exact(&kernel, &orbitals, (0, 1, 2, 3))?;
//! let fitted = factor.eri((0, 1, 2, 3))?;
//! assert!((exact - fitted).abs() < 1e-3 * exact.abs().max(1.0));
//! # Ok::<(), isdf::Error>(())
//! ```

pub mod coulomb;
pub mod df;
mod error;
mod fft;
pub mod grid;
pub mod interpolative;
pub mod model;
pub mod qr;
pub mod thc;
pub mod tol;

pub use coulomb::{eri_exact, CoulombKernel};
pub use df::{df_fit_seconds, df_least_squares, DfFit};
pub use error::{Error, Result};
pub use grid::PeriodicGrid;
pub use interpolative::{
    compress, interpolation_basis, pair_index, select_rank, sketch, Compressed, CompressTimings,
    InterpolativeBasis, PairDensityView, SketchMatrix,
};
pub use model::{
    hamiltonian, max_random_modes, random_potential, solve_orbitals, OrbitalSet, Potential,
};
pub use qr::{pivoted_qr, pivoted_qr_with_q, HouseholderQ, PivotedQr};
pub use thc::{
    all_quadruples, assemble_thc, error_bound_check, error_metrics, sample_quadruples, BoundCheck,
    ErrorReport, PairSampling, ThcFactor,
};
