//! Experiment configuration.
//!
//! One JSON file describes a whole sweep: the grid sizes, orbital counts,
//! and tolerances are each either a scalar or a list, and a run visits
//! their cross product. Unknown fields are rejected so typos fail loudly
//! instead of silently running defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A scalar or a sweep list; accepts both `128` and `[64, 128]` in JSON.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }

    fn is_empty(&self) -> bool {
        matches!(self, OneOrMany::Many(vs) if vs.is_empty())
    }
}

/// How residuals are measured: every ordered orbital pair, or a seeded
/// uniform sample of them (`{"sampled": {"count": 512, "seed": 1}}`).
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    #[default]
    Full,
    Sampled {
        count: usize,
        seed: u64,
    },
}

/// Everything a run needs. Except for the timing columns, outputs are a
/// pure function of this struct.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Spatial dimension of the periodic box: 1 or 3.
    pub dim: usize,
    /// Grid points along each axis; the total grid size is this value
    /// raised to `dim`.
    pub points_per_axis: OneOrMany<usize>,
    /// Orbital counts (lowest eigenstates of the discretized Hamiltonian).
    #[serde(rename = "N")]
    pub n_orbitals: OneOrMany<usize>,
    /// Fourier modes in the random potential.
    #[serde(default = "default_num_modes")]
    pub num_modes: usize,
    /// Pointwise standard deviation of the random potential.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Relative tolerance(s) for the rank cut.
    pub epsilon: OneOrMany<f64>,
    /// Oversampling factor of the row sketch.
    #[serde(default = "default_oversampling")]
    pub r: usize,
    /// Seed for both the potential and the compression sketch. The
    /// `THC_SEED` environment variable overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub error_mode: ErrorMode,
    /// Also time the least-squares density-fitting baseline.
    #[serde(default)]
    pub include_baseline: bool,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_num_modes() -> usize {
    128
}

fn default_amplitude() -> f64 {
    100.0
}

fn default_oversampling() -> usize {
    20
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| ConfigError {
            message: format!("{}: {e}", path.display()),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks; value-range problems (say, a tolerance of 1.5)
    /// surface later as numerical errors instead.
    fn validate(&self) -> Result<(), ConfigError> {
        let fail = |message: String| Err(ConfigError { message });
        if self.dim != 1 && self.dim != 3 {
            return fail(format!("dim must be 1 or 3, got {}", self.dim));
        }
        if self.points_per_axis.is_empty() {
            return fail("points_per_axis list is empty".into());
        }
        if self.n_orbitals.is_empty() {
            return fail("N list is empty".into());
        }
        if self.epsilon.is_empty() {
            return fail("epsilon list is empty".into());
        }
        if self.n_orbitals.values().iter().any(|&n| n == 0) {
            return fail("every N must be at least 1".into());
        }
        if let ErrorMode::Sampled { count, .. } = self.error_mode {
            if count == 0 {
                return fail("sampled error mode needs a positive count".into());
            }
        }
        Ok(())
    }

    /// Applies the `THC_SEED` override when the variable is set.
    pub fn apply_seed_override(&mut self, var: Option<&str>) -> Result<(), ConfigError> {
        if let Some(text) = var {
            self.seed = text.trim().parse().map_err(|_| ConfigError {
                message: format!("THC_SEED must be an unsigned integer, got {text:?}"),
            })?;
        }
        Ok(())
    }
}

/// A problem with the configuration itself (exit code 1), as opposed to a
/// numerical failure inside the library (exit code 2).
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}
