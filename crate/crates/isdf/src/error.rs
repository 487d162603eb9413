use thiserror::Error;

/// Crate-wide error type. Invalid-input conditions are separated from
/// numerical failures so callers can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension must be 1 or 3, got {0}")]
    UnsupportedDim(usize),

    #[error("points per axis must be even and at least 2, got {0}")]
    BadAxisPoints(usize),

    #[error("requested {requested} random modes but the grid supports only {available} conjugate pairs")]
    TooManyModes { requested: usize, available: usize },

    #[error("requested {requested} orbitals but the grid has only {available} points")]
    TooManyOrbitals { requested: usize, available: usize },

    #[error("operands live on different grids ({0})")]
    GridMismatch(&'static str),

    #[error("epsilon must lie strictly inside (0, 1), got {0:e}")]
    BadEpsilon(f64),

    #[error("oversampling factor r must be at least 1")]
    BadOversampling,

    #[error("orbital index {index} out of range for {count} orbitals")]
    OrbitalIndex { index: usize, count: usize },

    #[error("grid point index {index} out of range for {count} points")]
    PointIndex { index: usize, count: usize },

    #[error("auxiliary rank {requested} exceeds the {available} factored columns")]
    RankOutOfRange { requested: usize, available: usize },

    #[error("sketch matrix is numerically zero; the orbital set is degenerate")]
    ZeroSketch,

    #[error("leading triangular block is numerically singular at step {step} (|R_kk|/|R_11| = {ratio:.3e})")]
    SingularBlock { step: usize, ratio: f64 },

    #[error("auxiliary Gram matrix is not positive definite even after regularization")]
    GramNotPositive,

    #[error("division by near-zero norm {0:.3e}; input field is degenerate")]
    DegenerateNorm(f64),

    #[error("pair sample count {requested} is invalid; need between 1 and {available}")]
    BadSampleCount { requested: usize, available: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
