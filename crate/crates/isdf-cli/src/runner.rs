//! Sweep execution: config in, result rows out.
//!
//! For each grid the orbitals are solved once at the largest requested
//! count and truncated for the smaller ones — the eigensolve dominates
//! setup and the leading eigenvectors are identical either way. Rows land
//! in the sink as soon as they finish, so partial sweeps are preserved.

use std::fmt;
use std::io;
use std::time::Instant;

use isdf::thc::PairSampling;
use isdf::{
    assemble_thc, compress, df_fit_seconds, error_metrics, random_potential, solve_orbitals,
    CoulombKernel, PeriodicGrid,
};
use log::info;

use crate::config::{ErrorMode, ExperimentConfig};
use crate::report::{unix_timestamp, ReportSink, ResultRow, StageSeconds};

/// Anything that can stop a sweep, split by exit-code class.
#[derive(Debug)]
pub enum RunError {
    Numerics(isdf::Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Numerics(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "cannot write results: {e}"),
        }
    }
}

impl From<isdf::Error> for RunError {
    fn from(e: isdf::Error) -> Self {
        RunError::Numerics(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Runs the cross product of grid sizes, orbital counts, and tolerances.
pub fn execute(config: &ExperimentConfig, sink: &mut ReportSink) -> Result<(), RunError> {
    let sampling = match config.error_mode {
        ErrorMode::Full => PairSampling::All,
        ErrorMode::Sampled { count, seed } => PairSampling::Sample { count, seed },
    };
    for m in config.points_per_axis.values() {
        let grid = PeriodicGrid::new(config.dim, m)?;
        let kernel = CoulombKernel::new(grid);
        let potential = random_potential(grid, config.num_modes, config.amplitude, config.seed)?;
        let n_list = config.n_orbitals.values();
        let n_max = *n_list.iter().max().expect("validated nonempty");
        info!("grid {}^{}: solving {n_max} orbitals", m, config.dim);
        let solved = solve_orbitals(&potential, n_max)?;

        for &n_orbitals in &n_list {
            let orbitals = solved.leading(n_orbitals)?;
            for epsilon in config.epsilon.values() {
                info!(
                    "compress: m={m} N={n_orbitals} epsilon={epsilon:e} seed={}",
                    config.seed
                );
                let compressed = compress(&orbitals, epsilon, config.r, config.seed)?;

                let start = Instant::now();
                let factor = assemble_thc(&orbitals, &compressed.basis, &kernel)?;
                let core = start.elapsed().as_secs_f64();

                let report = error_metrics(&orbitals, &compressed.basis, &kernel, sampling)?;

                let time_baseline_s = if config.include_baseline {
                    Some(df_fit_seconds(&orbitals, &compressed.basis)?)
                } else {
                    None
                };

                sink.push(ResultRow {
                    dim: config.dim,
                    m,
                    n: grid.len(),
                    n_orbitals,
                    epsilon,
                    r: config.r,
                    seed: config.seed,
                    n_aux: factor.n_aux(),
                    max_e2: report.max_e2,
                    max_ec: report.max_ec,
                    rel_2_error: report.rel_2_error,
                    rel_c_error: report.rel_c_error,
                    time_compress_s: compressed.timings.total(),
                    time_baseline_s,
                    num_modes: config.num_modes,
                    amplitude: config.amplitude,
                    pairs_evaluated: report.pairs_evaluated,
                    timestamp_unix_s: unix_timestamp(),
                    stage_seconds: StageSeconds {
                        sketch: compressed.timings.sketch_s,
                        qr: compressed.timings.qr_s,
                        basis: compressed.timings.basis_s,
                        core,
                        metrics: report.seconds,
                    },
                })?;
            }
        }
    }
    Ok(())
}
