//! Plot-data emission and log-log slope fits.
//!
//! Plots are data files, not images: two-column curves plus a reference
//! column normalized to pass through the first data point (a straight line
//! for rank growth, `N^2 log N` and `N^3` for timings). Slope fits use
//! ordinary least squares in log-log space.
//!
//! Sweeps with several tolerances are plotted and fitted at the tightest
//! one; the summary records which subset each fit used.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::report::ResultRow;

/// Least-squares slope of `log y` against `log x`. Needs two or more
/// distinct positive abscissas; anything else has no defined slope.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Some(sxy / sxx)
}

/// Rank growth between consecutive orbital counts.
#[derive(Clone, Debug, Serialize)]
pub struct RankRatio {
    #[serde(rename = "from_N")]
    pub from_n_orbitals: usize,
    #[serde(rename = "to_N")]
    pub to_n_orbitals: usize,
    pub naux_from: usize,
    pub naux_to: usize,
    pub ratio: f64,
}

/// Slopes and ratios of one sweep, written as `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    /// Tolerance the fits below were taken at.
    pub epsilon: f64,
    /// Total grid points held fixed for the versus-N fits (largest sweep).
    pub n_fixed: Option<usize>,
    #[serde(rename = "slope_time_vs_N")]
    pub slope_time_vs_n_orbitals: Option<f64>,
    #[serde(rename = "slope_baseline_time_vs_N")]
    pub slope_baseline_time_vs_n_orbitals: Option<f64>,
    #[serde(rename = "slope_naux_vs_N")]
    pub slope_naux_vs_n_orbitals: Option<f64>,
    pub naux_ratios: Vec<RankRatio>,
    /// Largest N where the baseline fit costs at least as much as
    /// compression, when both timings exist.
    #[serde(rename = "crossover_N")]
    pub crossover_n_orbitals: Option<usize>,
    /// Orbital count held fixed for the versus-n fit (largest sweep).
    #[serde(rename = "N_fixed")]
    pub n_orbitals_fixed: Option<usize>,
    pub slope_time_vs_n: Option<f64>,
}

/// The rows fitted against N: tightest tolerance, the total grid size with
/// the most distinct orbital counts (ties to the largest grid), sorted by N.
/// With several seeds per point the earliest row wins.
fn versus_n_orbitals(rows: &[ResultRow]) -> Vec<&ResultRow> {
    let Some(epsilon) = tightest_epsilon(rows) else {
        return Vec::new();
    };
    let at_eps: Vec<&ResultRow> = rows.iter().filter(|r| r.epsilon == epsilon).collect();
    let mut best: Option<(usize, usize)> = None; // (distinct N count, n)
    for row in &at_eps {
        let distinct = {
            let mut ns: Vec<usize> = at_eps
                .iter()
                .filter(|r| r.n == row.n)
                .map(|r| r.n_orbitals)
                .collect();
            ns.sort_unstable();
            ns.dedup();
            ns.len()
        };
        if best.is_none_or(|b| (distinct, row.n) > b) {
            best = Some((distinct, row.n));
        }
    }
    let Some((_, n_fixed)) = best else {
        return Vec::new();
    };
    let mut subset: Vec<&ResultRow> = at_eps.into_iter().filter(|r| r.n == n_fixed).collect();
    subset.sort_by_key(|r| r.n_orbitals);
    subset.dedup_by_key(|r| r.n_orbitals);
    subset
}

/// Same idea transposed: the orbital count with the most distinct grid
/// sizes, rows sorted by total grid points.
fn versus_grid_points(rows: &[ResultRow]) -> Vec<&ResultRow> {
    let Some(epsilon) = tightest_epsilon(rows) else {
        return Vec::new();
    };
    let at_eps: Vec<&ResultRow> = rows.iter().filter(|r| r.epsilon == epsilon).collect();
    let mut best: Option<(usize, usize)> = None; // (distinct n count, N)
    for row in &at_eps {
        let distinct = {
            let mut ns: Vec<usize> = at_eps
                .iter()
                .filter(|r| r.n_orbitals == row.n_orbitals)
                .map(|r| r.n)
                .collect();
            ns.sort_unstable();
            ns.dedup();
            ns.len()
        };
        if best.is_none_or(|b| (distinct, row.n_orbitals) > b) {
            best = Some((distinct, row.n_orbitals));
        }
    }
    let Some((_, n_orbitals)) = best else {
        return Vec::new();
    };
    let mut subset: Vec<&ResultRow> = at_eps
        .into_iter()
        .filter(|r| r.n_orbitals == n_orbitals)
        .collect();
    subset.sort_by_key(|r| r.n);
    subset.dedup_by_key(|r| r.n);
    subset
}

fn tightest_epsilon(rows: &[ResultRow]) -> Option<f64> {
    rows.iter()
        .map(|r| r.epsilon)
        .min_by(|a, b| a.total_cmp(b))
}

pub fn summarize(rows: &[ResultRow]) -> Option<SweepSummary> {
    let epsilon = tightest_epsilon(rows)?;
    let vs_n_orb = versus_n_orbitals(rows);
    let vs_grid = versus_grid_points(rows);

    let time_points: Vec<(f64, f64)> = vs_n_orb
        .iter()
        .map(|r| (r.n_orbitals as f64, r.time_compress_s))
        .collect();
    let baseline_points: Vec<(f64, f64)> = vs_n_orb
        .iter()
        .filter_map(|r| r.time_baseline_s.map(|t| (r.n_orbitals as f64, t)))
        .collect();
    let naux_points: Vec<(f64, f64)> = vs_n_orb
        .iter()
        .map(|r| (r.n_orbitals as f64, r.n_aux as f64))
        .collect();
    let grid_points: Vec<(f64, f64)> = vs_grid
        .iter()
        .map(|r| (r.n as f64, r.time_compress_s))
        .collect();

    let naux_ratios = vs_n_orb
        .windows(2)
        .map(|w| RankRatio {
            from_n_orbitals: w[0].n_orbitals,
            to_n_orbitals: w[1].n_orbitals,
            naux_from: w[0].n_aux,
            naux_to: w[1].n_aux,
            ratio: w[1].n_aux as f64 / w[0].n_aux as f64,
        })
        .collect();

    let crossover_n_orbitals = vs_n_orb
        .iter()
        .filter(|r| r.time_baseline_s.is_some_and(|t| t >= r.time_compress_s))
        .map(|r| r.n_orbitals)
        .max();

    Some(SweepSummary {
        epsilon,
        n_fixed: vs_n_orb.first().map(|r| r.n),
        slope_time_vs_n_orbitals: log_log_slope(&time_points),
        slope_baseline_time_vs_n_orbitals: log_log_slope(&baseline_points),
        slope_naux_vs_n_orbitals: log_log_slope(&naux_points),
        naux_ratios,
        crossover_n_orbitals,
        n_orbitals_fixed: vs_grid.first().map(|r| r.n_orbitals),
        slope_time_vs_n: log_log_slope(&grid_points),
    })
}

/// `plot_naux_vs_N.csv`: selected ranks against orbital count with a
/// linear reference through the first point.
pub fn write_naux_plot(rows: &[ResultRow], path: &Path) -> io::Result<()> {
    let subset = versus_n_orbitals(rows);
    let Some(&first) = subset.first() else {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no rows to plot"));
    };
    let mut text = String::from("N,N_aux,ref_linear\n");
    for row in &subset {
        let reference = first.n_aux as f64 * row.n_orbitals as f64 / first.n_orbitals as f64;
        text += &format!("{},{},{}\n", row.n_orbitals, row.n_aux, reference);
    }
    fs::write(path, text)
}

/// `plot_time_vs_N.csv`: compression (and baseline, when present) timings
/// against orbital count. References: `N^2 log N` through the first
/// compression point, `N^3` through the first baseline point (or the first
/// compression point when no baseline ran).
pub fn write_time_plot(rows: &[ResultRow], path: &Path) -> io::Result<()> {
    let subset = versus_n_orbitals(rows);
    if subset.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no rows to plot"));
    }
    let mut text = String::from("N,time_compress_s,ref_n2logn,time_baseline_s,ref_n3\n");
    let n2logn = |n: usize| (n * n) as f64 * (n as f64).ln().max(1.0);
    let (n0, t0) = (subset[0].n_orbitals, subset[0].time_compress_s);
    let (nb, tb) = subset
        .iter()
        .find_map(|r| r.time_baseline_s.map(|t| (r.n_orbitals, t)))
        .unwrap_or((n0, t0));
    for row in &subset {
        let ref2 = t0 * n2logn(row.n_orbitals) / n2logn(n0);
        let ref3 = tb * (row.n_orbitals as f64 / nb as f64).powi(3);
        let baseline = row
            .time_baseline_s
            .map(|t| t.to_string())
            .unwrap_or_default();
        text += &format!(
            "{},{},{},{},{}\n",
            row.n_orbitals, row.time_compress_s, ref2, baseline, ref3
        );
    }
    fs::write(path, text)
}

pub fn write_summary(summary: &SweepSummary, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n")
}
