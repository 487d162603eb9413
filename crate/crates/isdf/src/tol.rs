//! Numerical guard thresholds used across the crate.
//!
//! Every constant here is load-bearing: tests pin behavior at these exact
//! values, so tightening or loosening one is an interface change.

/// The leading triangular block is declared numerically singular when its
/// last kept diagonal falls below this multiple of machine epsilon relative
/// to the first diagonal. Back-substitution past this point amplifies noise
/// instead of signal.
pub const SINGULAR_BLOCK_REL: f64 = 1e3 * f64::EPSILON;

/// Relative Frobenius norm of the discarded imaginary part of the
/// interpolation matrix above which a warning is logged. A complex sketch of
/// real data leaves an imaginary residue that scales with the truncation
/// threshold; measured values sit near 2e-2 across working tolerances, so
/// anything past this bound indicates a broken sketch or factorization.
pub const IMAG_WARN_REL: f64 = 0.2;

/// Coulomb quadratic forms of real fields are nonnegative; roundoff in the
/// FFT path may produce slightly negative values. Magnitudes within this
/// relative band are clamped to zero, anything more negative is an error.
pub const KERNEL_NEG_REL: f64 = 1e-12;

/// Norms below this floor cannot be used as denominators in relative error
/// metrics; the input is reported as degenerate instead.
pub const NORM_FLOOR: f64 = 1e-14;

/// Additive slack in the Cauchy-Schwarz ERI bound check, absorbing roundoff
/// when both sides are near zero.
pub const BOUND_SLACK_ABS: f64 = 1e-12;

/// Relative diagonal shift applied to the auxiliary Gram matrix when its
/// Cholesky factorization fails: shift = GRAM_SHIFT_REL * trace(S) / rank.
pub const GRAM_SHIFT_REL: f64 = 1e-12;
