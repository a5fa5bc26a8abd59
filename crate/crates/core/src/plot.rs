//! Plot-ready CSV tables derived from a completed report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::Stage;
use crate::error::{Error, Result};
use crate::pipeline::Report;

/// Figures with a tabular data export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    /// Sampling gap and period-error histograms.
    Gaps,
    /// Per-frequency min, deciles, median and max.
    Spectrum,
    /// Global level distribution.
    Distribution,
    /// Moving mean and deviation.
    MovingStats,
    /// Stationary fraction against chunk length.
    Stationarity,
    /// Autocorrelation with the significance bound.
    Acf,
    /// Step histogram against fitted densities.
    StepDensity,
    /// Burst length frequency and survival.
    Bursts,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::Gaps,
        FigureId::Spectrum,
        FigureId::Distribution,
        FigureId::MovingStats,
        FigureId::Stationarity,
        FigureId::Acf,
        FigureId::StepDensity,
        FigureId::Bursts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::Gaps => "gaps",
            FigureId::Spectrum => "spectrum",
            FigureId::Distribution => "distribution",
            FigureId::MovingStats => "moving_stats",
            FigureId::Stationarity => "stationarity",
            FigureId::Acf => "acf",
            FigureId::StepDensity => "step_density",
            FigureId::Bursts => "bursts",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.as_str())
    }

    /// Stage whose output the figure is drawn from.
    pub fn stage(self) -> Stage {
        match self {
            FigureId::Gaps => Stage::Qa,
            FigureId::Spectrum => Stage::Spectrum,
            FigureId::Distribution => Stage::Distribution,
            FigureId::MovingStats => Stage::MovingStats,
            FigureId::Stationarity => Stage::Stationarity,
            FigureId::Acf => Stage::Dependence,
            FigureId::StepDensity => Stage::Fit,
            FigureId::Bursts => Stage::Bursts,
        }
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}`")))
    }
}

fn missing(fig: FigureId) -> Error {
    Error::MissingStage(fig.stage().as_str().to_string())
}

struct Table {
    out: BufWriter<File>,
    path: PathBuf,
}

impl Table {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut t = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        t.row(header.iter().map(|h| h.to_string()))?;
        Ok(t)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> Result<()> {
        let line = cells.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

/// Writes the data table behind `fig` to `path`; fails with
/// [`Error::MissingStage`] when the stage it needs has not run.
pub fn emit_plot_data(report: &Report, fig: FigureId, path: &Path) -> Result<()> {
    match fig {
        FigureId::Gaps => {
            let qa = report.qa.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["kind", "value_s", "count"])?;
            for (kind, bins) in [("gap", &qa.gap_histogram), ("abs_error", &qa.abs_error_histogram)] {
                for b in bins {
                    t.row([kind.to_string(), num(b.value_s), b.count.to_string()])?;
                }
            }
            t.finish()
        }
        FigureId::Spectrum => {
            let s = report.spectrum.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["hz", "min", "q10", "q50", "q90", "max"])?;
            for r in &s.frequencies {
                let m = &r.summary;
                t.row([num(r.hz), num(m.min), num(m.q10), num(m.q50), num(m.q90), num(m.max)])?;
            }
            t.finish()
        }
        FigureId::Distribution => {
            let d = report.distribution.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["level_dbuv", "count", "pdf", "cdf"])?;
            for &(level, count, pdf, cdf) in &d.bins {
                t.row([num(level), count.to_string(), num(pdf), num(cdf)])?;
            }
            t.finish()
        }
        FigureId::MovingStats => {
            let m = report.moving_stats.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["hz", "channel", "start_index", "mean", "std", "variance"])?;
            for s in &m.series {
                for &(k, mean, std, var) in &s.rows {
                    t.row([num(s.hz), s.channel.to_string(), k.to_string(), num(mean), num(std), num(var)])?;
                }
            }
            t.finish()
        }
        FigureId::Stationarity => {
            let s = report.stationarity.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["chunk_len_s", "channel", "fraction"])?;
            for p in &s.curve.points {
                t.row([
                    num(p.chunk_len as f64 * s.period_s),
                    p.channel.map_or_else(|| "all".to_string(), |c| c.to_string()),
                    num(p.fraction),
                ])?;
            }
            t.finish()
        }
        FigureId::Acf => {
            let d = report.dependence.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["hz", "lag", "rho", "bound", "significant"])?;
            if d.long_lag.is_empty() {
                for f in &d.frequencies {
                    for (&lag, &rho) in d.lags.iter().zip(&f.rho) {
                        t.row([num(f.hz), lag.to_string(), num(rho), num(f.bound), (rho.abs() > f.bound).to_string()])?;
                    }
                }
            } else {
                for f in &d.long_lag {
                    for (lag, &rho) in f.values.iter().enumerate().skip(1) {
                        t.row([num(f.hz), lag.to_string(), num(rho), num(f.bound), (rho.abs() > f.bound).to_string()])?;
                    }
                }
            }
            t.finish()
        }
        FigureId::StepDensity => {
            let f = report.fit.as_ref().ok_or_else(|| missing(fig))?;
            let cands = &f.selection.candidates;
            let mut header = vec!["step_dbuv".to_string(), "count".into(), "empirical_density".into()];
            header.extend(cands.iter().map(|c| format!("pdf_{}", c.family.as_str().replace('-', "_"))));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::create(path, &header)?;
            let total: u64 = f.step_histogram.iter().map(|&(_, c)| c).sum();
            let width = f.step_histogram
                .windows(2)
                .map(|w| w[1].0 - w[0].0)
                .fold(f64::INFINITY, f64::min);
            let width = if width.is_finite() { width } else { 1.0 };
            for &(x, c) in &f.step_histogram {
                let mut row = vec![num(x), c.to_string(), num(c as f64 / (total as f64 * width))];
                row.extend(cands.iter().map(|cand| num(cand.pdf(x))));
                t.row(row)?;
            }
            t.finish()
        }
        FigureId::Bursts => {
            let b = report.bursts.as_ref().ok_or_else(|| missing(fig))?;
            let mut t = Table::create(path, &["threshold_dbuv", "length", "count", "frequency", "survival"])?;
            for th in &b.thresholds {
                let h = &th.histogram;
                let mut remaining = h.total_runs;
                for (k, c, freq) in h.frequencies() {
                    let survival = remaining as f64 / h.total_runs as f64;
                    t.row([num(th.threshold), k.to_string(), c.to_string(), num(freq), num(survival)])?;
                    remaining -= c;
                }
            }
            t.finish()
        }
    }
}

/// Writes every figure whose stage has completed; returns the written paths.
pub fn emit_all(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for fig in FigureId::ALL {
        let path = dir.join(fig.file_name());
        match emit_plot_data(report, fig, &path) {
            Ok(()) => written.push(path),
            Err(Error::MissingStage(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(written)
}
