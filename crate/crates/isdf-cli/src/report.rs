//! Result rows and their serialized forms.
//!
//! The CSV carries the fixed column set below; the JSON rows carry the same
//! data plus reproducibility extras (potential parameters, stage timings,
//! a timestamp). Rows are flushed as they are produced so a failing sweep
//! still leaves the finished rows on disk.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "dim,m,n,N,epsilon,r,seed,N_aux,max_e2,max_ec,\
rel_2_error,rel_c_error,time_compress_s,time_baseline_s";

/// Wall-clock seconds per pipeline stage.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq)]
pub struct StageSeconds {
    pub sketch: f64,
    pub qr: f64,
    pub basis: f64,
    pub core: f64,
    pub metrics: f64,
}

/// One experiment: one (grid, orbital count, tolerance) triple.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ResultRow {
    pub dim: usize,
    /// Grid points per axis.
    pub m: usize,
    /// Total grid points, `m^dim`.
    pub n: usize,
    /// Orbital count.
    #[serde(rename = "N")]
    pub n_orbitals: usize,
    pub epsilon: f64,
    pub r: usize,
    pub seed: u64,
    /// Selected interpolation points.
    #[serde(rename = "N_aux")]
    pub n_aux: usize,
    pub max_e2: f64,
    pub max_ec: f64,
    pub rel_2_error: f64,
    pub rel_c_error: f64,
    /// Sketch + pivoted QR + interpolation weights.
    pub time_compress_s: f64,
    /// Least-squares baseline fit, when requested.
    pub time_baseline_s: Option<f64>,
    pub num_modes: usize,
    pub amplitude: f64,
    pub pairs_evaluated: usize,
    pub timestamp_unix_s: u64,
    pub stage_seconds: StageSeconds,
}

impl ResultRow {
    /// The CSV projection, in `CSV_HEADER` order. Plain `Display` floats
    /// round-trip exactly, so the CSV loses nothing against the JSON.
    pub fn csv_line(&self) -> String {
        let baseline = self
            .time_baseline_s
            .map(|t| t.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.dim,
            self.m,
            self.n,
            self.n_orbitals,
            self.epsilon,
            self.r,
            self.seed,
            self.n_aux,
            self.max_e2,
            self.max_ec,
            self.rel_2_error,
            self.rel_c_error,
            self.time_compress_s,
            baseline,
        )
    }
}

/// Which serialized forms a sink writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Incremental writer for `results.csv` / `results.json`.
pub struct ReportSink {
    csv: Option<BufWriter<File>>,
    json_path: Option<PathBuf>,
    rows: Vec<ResultRow>,
}

impl ReportSink {
    pub fn create(out_dir: &Path, format: OutputFormat) -> io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        let csv = if format.wants_csv() {
            let mut file = BufWriter::new(File::create(out_dir.join("results.csv"))?);
            writeln!(file, "{CSV_HEADER}")?;
            file.flush()?;
            Some(file)
        } else {
            None
        };
        let json_path = format.wants_json().then(|| out_dir.join("results.json"));
        Ok(ReportSink {
            csv,
            json_path,
            rows: Vec::new(),
        })
    }

    /// Appends one row and flushes both forms. The JSON array is rewritten
    /// whole; sweeps are short, and a crash then costs at most one row.
    pub fn push(&mut self, row: ResultRow) -> io::Result<()> {
        if let Some(csv) = &mut self.csv {
            writeln!(csv, "{}", row.csv_line())?;
            csv.flush()?;
        }
        self.rows.push(row);
        if let Some(path) = &self.json_path {
            let text = serde_json::to_string_pretty(&self.rows)?;
            fs::write(path, text + "\n")?;
        }
        Ok(())
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }
}

pub fn unix_timestamp() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
