//! End-to-end analysis run: ingest, the analysis stages, and the on-disk
//! report bundle with its manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Stage};
use crate::dependence::{acf_direct, acf_fft, bartlett_bound, ljung_box_from_acf};
use crate::error::{invalid, Error, Result};
use crate::fit::{
    best_fit, burst_lengths, derivative_mass_report, difference, fit_t_weighted, geometric_fit,
    survival_r2_loglog, survival_r2_semilog, BurstHistogram, DerivativeMass, Family, GeometricFit,
    ModelSelection, TLocationScale, WeightedSample,
};
use crate::grid::{FrequencyGrid, QuantizationPolicy, Region};
use crate::ingest::{open_trace, regularize, GapAnalyzer, GapReport, RegularizationAudit};
use crate::plot::{emit_all, FigureId};
use crate::spectral::{moving_stats, segment_regions, FrequencySummary, SpectralAccumulator};
use crate::stationarity::{
    adf, channel_stationarity_curve, kpss_level, Bandwidth, StationarityCurve, TestOutcome,
};
use crate::synthesis::NoiseModel;

/// Per-frequency level series held in memory after ingest.
pub struct Dataset {
    pub grid: FrequencyGrid,
    pub policy: QuantizationPolicy,
    pub series: Vec<Vec<f64>>,
    pub spectral: SpectralAccumulator,
    pub gaps: std::result::Result<GapReport, String>,
    pub summary: IngestSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub inputs: Vec<String>,
    pub total_samples: u64,
    pub frequencies_present: usize,
    pub per_frequency_counts: Vec<u64>,
    pub regularization: Option<RegularizationAudit>,
}

impl Dataset {
    /// Reads every configured input into per-frequency series.
    pub fn ingest(cfg: &RunConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let policy = cfg.quantization()?;
        if cfg.inputs.is_empty() {
            return Err(Error::Config("no input files given".into()));
        }
        let bounds = crate::grid::SampleBounds::new(&grid, &policy);
        let mut series: Vec<Vec<f64>> = vec![Vec::new(); grid.count()];
        let mut spectral = SpectralAccumulator::new(policy, grid.count());
        let mut gaps = GapAnalyzer::new(cfg.sampling_period_s, 1e-3)?;
        let mut total = 0u64;
        for path in &cfg.inputs {
            for s in open_trace(path, cfg.format.resolve(path))?.with_bounds(bounds) {
                let s = s?;
                gaps.push(&s)?;
                spectral.accumulate(&s)?;
                series[s.freq_index as usize].push(s.level);
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyReport("inputs contain no samples".into()));
        }
        let mut regularization = None;
        if let Some(policy_gap) = cfg.gap_policy {
            let stream = cfg
                .inputs
                .iter()
                .map(|p| open_trace(p, cfg.format.resolve(p)).map(|r| r.with_bounds(bounds)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten();
            let reg = regularize(stream, cfg.sampling_period_s, policy_gap)?;
            series = vec![Vec::new(); grid.count()];
            spectral = SpectralAccumulator::new(policy, grid.count());
            for (f, s) in reg.series {
                spectral.accumulate_series(f as usize, &s.values)?;
                series[f as usize] = s.values;
            }
            regularization = Some(reg.audit);
        }
        let per_frequency_counts: Vec<u64> = series.iter().map(|s| s.len() as u64).collect();
        let summary = IngestSummary {
            inputs: cfg.inputs.iter().map(|p| p.display().to_string()).collect(),
            total_samples: per_frequency_counts.iter().sum(),
            frequencies_present: per_frequency_counts.iter().filter(|&&c| c > 0).count(),
            per_frequency_counts,
            regularization,
        };
        Ok(Self {
            grid,
            policy,
            series,
            spectral,
            gaps: gaps.finish().map_err(|e| e.to_string()),
            summary,
        })
    }

    /// Up to `per_channel` frequencies per channel with at least `min_len`
    /// samples, spread evenly across the channel; 0 takes all of them.
    pub fn subcarriers(&self, per_channel: usize, min_len: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for ch in 1..=self.grid.channel_count() {
            let present: Vec<usize> = self
                .grid
                .channel_indices(ch)
                .into_iter()
                .filter(|&i| self.series[i].len() >= min_len.max(2))
                .collect();
            if per_channel == 0 || per_channel >= present.len() {
                out.extend(present.iter().map(|&i| (ch, i)));
            } else {
                for k in 0..per_channel {
                    let pos = ((2 * k + 1) * present.len()) / (2 * per_channel);
                    out.push((ch, present[pos]));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub freq_index: usize,
    pub hz: f64,
    pub channel: usize,
    pub summary: FrequencySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub frequencies: Vec<SpectrumRow>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub total: u64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    /// `(level, count, pdf, cdf)` from the lowest to the highest occupied bin.
    pub bins: Vec<(f64, u64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingSeries {
    pub freq_index: usize,
    pub hz: f64,
    pub channel: usize,
    pub window: usize,
    /// `(window start, mean, std, variance)` every `stride` positions.
    pub rows: Vec<(usize, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingReport {
    pub window: usize,
    pub stride: usize,
    pub series: Vec<MovingSeries>,
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierTests {
    pub freq_index: usize,
    pub hz: f64,
    pub channel: usize,
    pub samples: usize,
    pub kpss: Option<TestOutcome>,
    pub adf: Option<TestOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub period_s: f64,
    pub subcarriers: Vec<SubcarrierTests>,
    pub skipped_chunk_lengths: Vec<usize>,
    pub curve: StationarityCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDependence {
    pub freq_index: usize,
    pub hz: f64,
    pub samples: usize,
    pub bound: f64,
    /// `rho` at each configured lag.
    pub rho: Vec<f64>,
    pub ljung_box: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongAcf {
    pub freq_index: usize,
    pub hz: f64,
    pub bound: f64,
    /// Lags `0..=long_lag`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub lags: Vec<usize>,
    pub alpha: f64,
    pub ljung_box_lags: usize,
    pub frequencies: Vec<FrequencyDependence>,
    pub ljung_box_rejected_fraction: f64,
    pub long_lag: Vec<LongAcf>,
    pub skipped: Vec<(usize, String)>,
}

/// Fitted step model in its file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub loglik: f64,
    pub n: usize,
    pub quantization: QuantizationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerFrequencyFit {
    pub freq_index: usize,
    pub fit: Option<ModelFile>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub selection: ModelSelection,
    pub t_fit: Option<ModelFile>,
    pub derivative_mass: DerivativeMass,
    /// `(step, count)` on the quantization grid.
    pub step_histogram: Vec<(f64, u64)>,
    pub model: Option<NoiseModel>,
    pub per_frequency: Vec<PerFrequencyFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstThresholdReport {
    pub threshold: f64,
    pub histogram: BurstHistogram,
    pub geometric: Option<GeometricFit>,
    pub geometric_error: Option<String>,
    pub r2_loglog: Option<f64>,
    pub r2_semilog: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstReport {
    pub fit_min_length: u64,
    pub fit_max_length: u64,
    pub thresholds: Vec<BurstThresholdReport>,
}

/// In-memory results of a run; stages that did not run or failed are `None`.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub grid: Option<FrequencyGrid>,
    pub period_s: f64,
    pub qa: Option<GapReport>,
    pub spectrum: Option<SpectrumReport>,
    pub distribution: Option<DistributionReport>,
    pub moving_stats: Option<MovingReport>,
    pub stationarity: Option<StationarityReport>,
    pub dependence: Option<DependenceReport>,
    pub fit: Option<FitReport>,
    pub bursts: Option<BurstReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub error: Option<String>,
    pub elapsed_ms: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: BTreeMap<String, String>,
    pub ingest: StageRecord,
    pub ingest_summary: Option<IngestSummary>,
    pub stages: Vec<StageRecord>,
    pub total_elapsed_ms: f64,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.ingest.status == StageStatus::Ok && self.stages.iter().all(|s| s.status != StageStatus::Failed)
    }
}

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    ConfigError,
    IngestError,
    StageFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ConfigError => 2,
            RunStatus::IngestError => 3,
            RunStatus::StageFailure => 4,
        }
    }
}

pub struct RunOutcome {
    pub status: RunStatus,
    pub report: Report,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIGURE_DIR: &str = "figures";

/// Environment variable overriding the default thread count.
pub const THREADS_ENV: &str = "PLCNOISE_THREADS";

/// Thread count: the configured value, else the environment override, else
/// every core.
pub fn resolve_threads(cfg: &RunConfig) -> Result<usize> {
    if cfg.threads > 0 {
        return Ok(cfg.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn stage_file(stage: Stage) -> String {
    format!("{}.json", stage.as_str())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the configured stages and writes the report bundle: one JSON file per
/// stage, the figure CSVs under `figures/`, and `manifest.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let threads = resolve_threads(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, threads))
}

fn config_map(cfg: &RunConfig) -> BTreeMap<String, String> {
    cfg.to_text()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn run_in_pool(cfg: &RunConfig, threads: usize) -> Result<RunOutcome> {
    let started = Instant::now();
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.clone(),
        source,
    })?;
    let mut manifest = Manifest {
        tool: "plcnoise".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        threads,
        config: config_map(cfg),
        ingest: StageRecord {
            stage: "ingest".into(),
            status: StageStatus::Ok,
            error: None,
            elapsed_ms: 0.0,
            outputs: Vec::new(),
        },
        ingest_summary: None,
        stages: Vec::new(),
        total_elapsed_ms: 0.0,
    };
    let mut report = Report {
        period_s: cfg.sampling_period_s,
        ..Default::default()
    };

    let t = Instant::now();
    let data = Dataset::ingest(cfg);
    manifest.ingest.elapsed_ms = ms(t);
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            manifest.ingest.status = StageStatus::Failed;
            manifest.ingest.error = Some(e.to_string());
            manifest.stages = cfg
                .stages
                .iter()
                .map(|s| StageRecord {
                    stage: s.as_str().into(),
                    status: StageStatus::Skipped,
                    error: Some("ingest failed".into()),
                    elapsed_ms: 0.0,
                    outputs: Vec::new(),
                })
                .collect();
            manifest.total_elapsed_ms = ms(started);
            write_json(&out.join(MANIFEST_FILE), &manifest)?;
            let status = if matches!(e, Error::Config(_)) {
                RunStatus::ConfigError
            } else {
                RunStatus::IngestError
            };
            return Ok(RunOutcome {
                status,
                report,
                manifest,
                output_dir: out,
            });
        }
    };
    manifest.ingest_summary = Some(data.summary.clone());
    report.grid = Some(data.grid.clone());

    let fig_dir = out.join(FIGURE_DIR);
    fs::create_dir_all(&fig_dir).map_err(|source| Error::Io {
        path: fig_dir.clone(),
        source,
    })?;

    let mut stages = cfg.stages.clone();
    stages.sort();
    stages.dedup();
    for stage in stages {
        let t = Instant::now();
        let result = run_stage(stage, cfg, &data, &mut report, &out);
        let record = match result {
            Ok(()) => {
                let mut outputs = vec![stage_file(stage)];
                for fig in FigureId::ALL.iter().filter(|f| f.stage() == stage) {
                    let path = fig_dir.join(fig.file_name());
                    crate::plot::emit_plot_data(&report, *fig, &path)?;
                    outputs.push(format!("{FIGURE_DIR}/{}", fig.file_name()));
                }
                StageRecord {
                    stage: stage.as_str().into(),
                    status: StageStatus::Ok,
                    error: None,
                    elapsed_ms: ms(t),
                    outputs,
                }
            }
            Err(e) => StageRecord {
                stage: stage.as_str().into(),
                status: StageStatus::Failed,
                error: Some(e.to_string()),
                elapsed_ms: ms(t),
                outputs: Vec::new(),
            },
        };
        manifest.stages.push(record);
    }
    manifest.total_elapsed_ms = ms(started);
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let status = if manifest.all_ok() {
        RunStatus::Ok
    } else {
        RunStatus::StageFailure
    };
    Ok(RunOutcome {
        status,
        report,
        manifest,
        output_dir: out,
    })
}

fn run_stage(stage: Stage, cfg: &RunConfig, data: &Dataset, report: &mut Report, out: &Path) -> Result<()> {
    let path = out.join(stage_file(stage));
    match stage {
        Stage::Qa => {
            let r = data.gaps.clone().map_err(Error::EmptyReport)?;
            write_json(&path, &r)?;
            report.qa = Some(r);
        }
        Stage::Spectrum => {
            let r = spectrum_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.spectrum = Some(r);
        }
        Stage::Distribution => {
            let r = distribution_stage(data)?;
            write_json(&path, &r)?;
            report.distribution = Some(r);
        }
        Stage::MovingStats => {
            let r = moving_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.moving_stats = Some(r);
        }
        Stage::Stationarity => {
            let r = stationarity_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.stationarity = Some(r);
        }
        Stage::Dependence => {
            let r = dependence_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.dependence = Some(r);
        }
        Stage::Fit => {
            let r = fit_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.fit = Some(r);
        }
        Stage::Bursts => {
            let r = burst_stage(cfg, data)?;
            write_json(&path, &r)?;
            report.bursts = Some(r);
        }
    }
    Ok(())
}

fn channel_of(grid: &FrequencyGrid, i: usize) -> usize {
    grid.channel_of(i).unwrap_or(0)
}

pub fn spectrum_stage(cfg: &RunConfig, data: &Dataset) -> Result<SpectrumReport> {
    let summary = data.spectral.frequency_summary();
    let regions = segment_regions(&data.grid, &summary, &cfg.region_boundaries_hz)?;
    let frequencies = summary
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.map(|summary| SpectrumRow {
                freq_index: i,
                hz: data.grid.frequency(i),
                channel: channel_of(&data.grid, i),
                summary,
            })
        })
        .collect();
    Ok(SpectrumReport { frequencies, regions })
}

pub fn distribution_stage(data: &Dataset) -> Result<DistributionReport> {
    let g = data.spectral.global_distribution()?;
    let first = g.counts.iter().position(|&c| c > 0).expect("non-empty");
    let last = g.counts.iter().rposition(|&c| c > 0).expect("non-empty");
    let bins = (first..=last)
        .map(|b| (data.policy.bin_lower(b), g.counts[b], g.pdf[b], g.cdf[b]))
        .collect();
    Ok(DistributionReport {
        total: g.total,
        q10: g.quantile(0.10),
        q50: g.quantile(0.50),
        q90: g.quantile(0.90),
        bins,
    })
}

pub fn moving_stage(cfg: &RunConfig, data: &Dataset) -> Result<MovingReport> {
    let picks = data.subcarriers(cfg.subcarriers_per_channel, 2);
    if picks.is_empty() {
        return Err(invalid("no frequency has enough samples"));
    }
    let results: Vec<std::result::Result<MovingSeries, (usize, String)>> = picks
        .par_iter()
        .map(|&(ch, i)| {
            let s = &data.series[i];
            let m = moving_stats(s, cfg.moving_window).map_err(|e| (i, e.to_string()))?;
            let rows = (0..m.len())
                .step_by(cfg.moving_stride)
                .map(|k| (k, m.mean[k], m.std[k], m.variance[k]))
                .collect();
            Ok(MovingSeries {
                freq_index: i,
                hz: data.grid.frequency(i),
                channel: ch,
                window: cfg.moving_window,
                rows,
            })
        })
        .collect();
    let mut report = MovingReport {
        window: cfg.moving_window,
        stride: cfg.moving_stride,
        series: Vec::new(),
        skipped: Vec::new(),
    };
    for r in results {
        match r {
            Ok(s) => report.series.push(s),
            Err(e) => report.skipped.push(e),
        }
    }
    if report.series.is_empty() {
        return Err(invalid(format!(
            "no selected series is longer than the {}-sample window",
            cfg.moving_window
        )));
    }
    Ok(report)
}

pub fn stationarity_stage(cfg: &RunConfig, data: &Dataset) -> Result<StationarityReport> {
    let picks = data.subcarriers(cfg.subcarriers_per_channel, 10);
    if picks.is_empty() {
        return Err(invalid("no frequency has the 10 samples KPSS needs"));
    }
    let shortest = picks.iter().map(|&(_, i)| data.series[i].len()).min().unwrap();
    let (usable, skipped): (Vec<usize>, Vec<usize>) =
        cfg.chunk_lengths.iter().partition(|&&c| c <= shortest);
    if usable.is_empty() {
        return Err(invalid(format!(
            "shortest selected series has {shortest} samples, below every chunk length"
        )));
    }
    let alpha = cfg.stationarity_alpha;
    let subcarriers = picks
        .par_iter()
        .map(|&(ch, i)| {
            let s = &data.series[i];
            SubcarrierTests {
                freq_index: i,
                hz: data.grid.frequency(i),
                channel: ch,
                samples: s.len(),
                kpss: kpss_level(s, Bandwidth::Auto, alpha).ok(),
                adf: adf(s, cfg.adf_lags, alpha).ok(),
            }
        })
        .collect();
    let input: Vec<(usize, &[f64])> = picks.iter().map(|&(ch, i)| (ch, &data.series[i][..])).collect();
    let curve = channel_stationarity_curve(&input, &usable, alpha)?;
    Ok(StationarityReport {
        period_s: cfg.sampling_period_s,
        subcarriers,
        skipped_chunk_lengths: skipped,
        curve,
    })
}

pub fn dependence_stage(cfg: &RunConfig, data: &Dataset) -> Result<DependenceReport> {
    let max_lag = cfg.acf_lags.iter().copied().max().unwrap_or(1).max(cfg.ljung_box_lags);
    let results: Vec<std::result::Result<FrequencyDependence, (usize, String)>> = (0..data.grid.count())
        .into_par_iter()
        .filter(|&i| !data.series[i].is_empty())
        .map(|i| {
            let s = &data.series[i];
            let fail = |e: Error| (i, e.to_string());
            let rho = acf_direct(s, max_lag).map_err(fail)?;
            let lb = ljung_box_from_acf(&rho, s.len(), cfg.ljung_box_lags, cfg.acf_alpha).map_err(fail)?;
            Ok(FrequencyDependence {
                freq_index: i,
                hz: data.grid.frequency(i),
                samples: s.len(),
                bound: bartlett_bound(s.len(), cfg.acf_alpha).map_err(fail)?,
                rho: cfg.acf_lags.iter().map(|&k| rho[k]).collect(),
                ljung_box: lb,
            })
        })
        .collect();
    let mut frequencies = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(f) => frequencies.push(f),
            Err(e) => skipped.push(e),
        }
    }
    if frequencies.is_empty() {
        return Err(invalid("no frequency supports the autocorrelation analysis"));
    }
    let long_lag = if cfg.acf_long_lag > max_lag {
        data.subcarriers(cfg.subcarriers_per_channel, cfg.acf_long_lag + 1)
            .par_iter()
            .filter_map(|&(_, i)| {
                let s = &data.series[i];
                let values = acf_fft(s, cfg.acf_long_lag).ok()?;
                Some(LongAcf {
                    freq_index: i,
                    hz: data.grid.frequency(i),
                    bound: bartlett_bound(s.len(), cfg.acf_alpha).ok()?,
                    values,
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    let rejected = frequencies.iter().filter(|f| f.ljung_box.rejected()).count();
    Ok(DependenceReport {
        lags: cfg.acf_lags.clone(),
        alpha: cfg.acf_alpha,
        ljung_box_lags: cfg.ljung_box_lags,
        ljung_box_rejected_fraction: rejected as f64 / frequencies.len() as f64,
        frequencies,
        long_lag,
        skipped,
    })
}

/// Steps of every frequency, concatenated in frequency order.
pub fn pooled_steps(data: &Dataset) -> Vec<f64> {
    data.series
        .iter()
        .filter(|s| s.len() >= 2)
        .flat_map(|s| difference(s).expect("length checked"))
        .collect()
}

fn model_file(t: &TLocationScale, loglik: f64, n: usize, policy: QuantizationPolicy) -> ModelFile {
    ModelFile {
        family: Family::TLocationScale,
        mu: t.mu,
        sigma: t.sigma,
        nu: t.nu,
        loglik,
        n,
        quantization: policy,
    }
}

pub fn fit_stage(cfg: &RunConfig, data: &Dataset) -> Result<FitReport> {
    let d = pooled_steps(data);
    if d.is_empty() {
        return Err(invalid("no frequency has two samples to difference"));
    }
    let ws = WeightedSample::new(&d)?;
    let selection = best_fit(&ws, &cfg.fit_families)?;
    let t_fit = selection.candidate(Family::TLocationScale).map(|c| ModelFile {
        family: Family::TLocationScale,
        mu: c.mu,
        sigma: c.sigma,
        nu: c.nu.expect("t candidate carries nu"),
        loglik: c.loglik,
        n: c.n,
        quantization: data.policy,
    });
    let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
    for (v, w) in ws.values().iter().zip(ws.weights()) {
        *hist.entry(data.policy.to_ticks(*v)).or_default() += *w as u64;
    }
    let step_histogram = hist.into_iter().map(|(k, c)| (data.policy.from_ticks(k), c)).collect();

    let model = match &t_fit {
        Some(t) => {
            let summary = data.spectral.frequency_summary();
            let regions = segment_regions(&data.grid, &summary, &cfg.region_boundaries_hz)?;
            let fit = crate::fit::TFit {
                dist: TLocationScale::new(t.mu, t.sigma, t.nu)?,
                loglik: t.loglik,
                n: t.n,
                evaluations: 0,
            };
            NoiseModel::from_fit(
                &fit,
                &data.grid,
                &regions,
                cfg.synth_band_half_width,
                cfg.synth_kappa,
                data.policy,
                cfg.seed,
            )
            .ok()
        }
        None => None,
    };

    let per_frequency = if cfg.fit_per_frequency {
        (0..data.grid.count())
            .into_par_iter()
            .filter(|&i| data.series[i].len() >= 2)
            .map(|i| {
                let r = difference(&data.series[i])
                    .and_then(|d| WeightedSample::new(&d))
                    .and_then(|w| fit_t_weighted(&w));
                match r {
                    Ok(f) => PerFrequencyFit {
                        freq_index: i,
                        fit: Some(model_file(&f.dist, f.loglik, f.n, data.policy)),
                        error: None,
                    },
                    Err(e) => PerFrequencyFit {
                        freq_index: i,
                        fit: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(FitReport {
        selection,
        t_fit,
        derivative_mass: derivative_mass_report(&d)?,
        step_histogram,
        model,
        per_frequency,
    })
}

pub fn burst_stage(cfg: &RunConfig, data: &Dataset) -> Result<BurstReport> {
    let present: Vec<usize> = (0..data.grid.count()).filter(|&i| data.series[i].len() >= 2).collect();
    if present.is_empty() {
        return Err(invalid("no frequency has two samples"));
    }
    let thresholds = cfg
        .burst_thresholds
        .iter()
        .map(|&threshold| {
            let parts: Vec<BurstHistogram> = present
                .par_iter()
                .map(|&i| burst_lengths(&data.series[i], threshold))
                .collect::<Result<_>>()?;
            let mut histogram = BurstHistogram::empty(threshold);
            for p in &parts {
                histogram.merge(p)?;
            }
            let (geometric, geometric_error) = match geometric_fit(&histogram) {
                Ok(g) => (Some(g), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(BurstThresholdReport {
                threshold,
                r2_loglog: survival_r2_loglog(&histogram, cfg.burst_fit_min_length, cfg.burst_fit_max_length),
                r2_semilog: survival_r2_semilog(&histogram, cfg.burst_fit_min_length, cfg.burst_fit_max_length),
                histogram,
                geometric,
                geometric_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BurstReport {
        fit_min_length: cfg.burst_fit_min_length,
        fit_max_length: cfg.burst_fit_max_length,
        thresholds,
    })
}

/// Writes every figure whose stage completed into `dir`.
pub fn write_figures(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    emit_all(report, dir)
}

/// Synthesis model from the `synth.*` keys, anchored at the default region
/// medians. Needs exactly three region boundaries.
pub fn config_model(cfg: &RunConfig) -> Result<NoiseModel> {
    use crate::synthesis::REFERENCE_REGION_MEDIANS;
    let grid = cfg.grid()?;
    if cfg.region_boundaries_hz.len() + 1 != REFERENCE_REGION_MEDIANS.len() {
        return Err(Error::Config(format!(
            "default anchors need {} region boundaries, got {}; pass a model file instead",
            REFERENCE_REGION_MEDIANS.len() - 1,
            cfg.region_boundaries_hz.len()
        )));
    }
    let anchor = (0..grid.count())
        .map(|i| {
            let f = grid.frequency(i);
            REFERENCE_REGION_MEDIANS[cfg.region_boundaries_hz.iter().filter(|&&b| f >= b).count()]
        })
        .collect();
    NoiseModel::new(
        (cfg.synth_mu, cfg.synth_sigma, cfg.synth_nu),
        anchor,
        cfg.synth_band_half_width,
        cfg.synth_kappa,
        cfg.quantization()?,
        cfg.seed,
    )
    .map_err(|e| Error::Config(e.to_string()))
}

/// Reads a model file: either a bare model or a fit report carrying one
/// under `model`.
pub fn load_model(path: &Path) -> Result<NoiseModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("model") {
        if inner.is_null() {
            return Err(Error::Config(format!("{} carries no model", path.display())));
        }
        value = inner.take();
    }
    let model: NoiseModel = serde_json::from_value(value)?;
    model.validate()?;
    Ok(model)
}

/// Streams `ticks` samples per selected frequency to `path`; returns the
/// number written.
pub fn write_synthetic_trace(
    model: &NoiseModel,
    freq_indices: &[usize],
    ticks: u64,
    period_s: f64,
    path: &Path,
    format: crate::ingest::TraceFormat,
) -> Result<u64> {
    let synth = crate::synthesis::TraceSynthesizer::new(model, freq_indices, ticks, period_s)?;
    let mut w = crate::ingest::TraceWriter::create(path, format)?;
    let mut n = 0;
    for s in synth {
        w.write(&s)?;
        n += 1;
    }
    w.finish()?;
    Ok(n)
}
