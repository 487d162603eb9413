//! `isdf-bench`: compress grid-discretized orbital pair densities and
//! report accuracy, rank growth, and timing scaling.
//!
//! Subcommands:
//! - `run` executes a config and writes result rows.
//! - `scaling` also fits log-log slopes and emits plot data.
//! - `compare-df` additionally times the least-squares density-fitting
//!   baseline on every row and reports the cost crossover.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O problems, 2 for
//! numerical failures inside the library.

mod config;
mod plots;
mod report;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use report::{OutputFormat, ReportSink};
use runner::RunError;

#[derive(Parser)]
#[command(name = "isdf-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write result rows.
    Run(CommonArgs),
    /// Run the sweep, then fit scaling slopes and emit plot data.
    Scaling(CommonArgs),
    /// Time compression against the least-squares baseline per size.
    CompareDf(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Run(a) | Command::Scaling(a) | Command::CompareDf(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_path; default ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 keeps the library default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Which result files to write.
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
        // --help and --version land here.
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numerics(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
    }
}

enum Failure {
    Config(String),
    Io(std::io::Error),
    Numerics(isdf::Error),
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.message)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Numerics(e) => Failure::Numerics(e),
            RunError::Io(e) => Failure::Io(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    let args = command.args();
    let mut config = ExperimentConfig::load(&args.config)?;
    let thc_seed = std::env::var("THC_SEED").ok();
    config.apply_seed_override(thc_seed.as_deref())?;
    if matches!(command, Command::CompareDf(_)) {
        config.include_baseline = true;
    }

    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot set --threads: {e}")))?;
    }

    let out_dir: &Path = args
        .out
        .as_deref()
        .or(config.output_path.as_deref())
        .unwrap_or(Path::new("."));

    let mut sink = ReportSink::create(out_dir, args.format)?;
    runner::execute(&config, &mut sink)?;

    if matches!(command, Command::Scaling(_) | Command::CompareDf(_)) {
        plots::write_naux_plot(sink.rows(), &out_dir.join("plot_naux_vs_N.csv"))?;
        plots::write_time_plot(sink.rows(), &out_dir.join("plot_time_vs_N.csv"))?;
        if let Some(summary) = plots::summarize(sink.rows()) {
            plots::write_summary(&summary, &out_dir.join("summary.json"))?;
        }
    }
    eprintln!(
        "wrote {} row(s) to {}",
        sink.rows().len(),
        out_dir.display()
    );
    Ok(())
}
