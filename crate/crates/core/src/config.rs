//! Run configuration and its flat `key = value` text form.
//!
//! Lines are `key = value`; `#` starts a comment; list values are
//! comma-separated. Unknown keys are an error. Every key has a default, so an
//! empty file is a valid configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::Family;
use crate::grid::{
    FrequencyGrid, QuantizationPolicy, DEFAULT_CHANNELS, DEFAULT_END_HZ, DEFAULT_FREQUENCY_COUNT,
    DEFAULT_REGION_BOUNDARIES_HZ, DEFAULT_START_HZ,
};
use crate::ingest::{GapPolicy, TraceFormat};
use crate::stationarity::{Alpha, DEFAULT_CHUNK_LENGTHS};
use crate::synthesis::{DEFAULT_BAND_HALF_WIDTH, DEFAULT_KAPPA, REFERENCE_STEP};

/// Analysis stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Qa,
    Spectrum,
    Distribution,
    MovingStats,
    Stationarity,
    Dependence,
    Fit,
    Bursts,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Qa,
        Stage::Spectrum,
        Stage::Distribution,
        Stage::MovingStats,
        Stage::Stationarity,
        Stage::Dependence,
        Stage::Fit,
        Stage::Bursts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Qa => "qa",
            Stage::Spectrum => "spectrum",
            Stage::Distribution => "distribution",
            Stage::MovingStats => "moving_stats",
            Stage::Stationarity => "stationarity",
            Stage::Dependence => "dependence",
            Stage::Fit => "fit",
            Stage::Bursts => "bursts",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Input format selection; `Auto` picks by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputFormat {
    Auto,
    Fixed(TraceFormat),
}

impl InputFormat {
    pub fn resolve(self, path: &Path) -> TraceFormat {
        match self {
            InputFormat::Auto => TraceFormat::from_path(path),
            InputFormat::Fixed(f) => f,
        }
    }
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    pub output_dir: PathBuf,
    /// 0 uses every core.
    pub threads: usize,
    pub seed: u64,
    pub stages: Vec<Stage>,

    pub grid_frequencies: usize,
    pub grid_start_hz: f64,
    pub grid_end_hz: f64,
    pub grid_channels: usize,
    pub quant_bin_width: f64,
    pub quant_min: f64,
    pub quant_max: f64,
    pub region_boundaries_hz: Vec<f64>,

    pub sampling_period_s: f64,
    /// `None` analyses samples in arrival order.
    pub gap_policy: Option<GapPolicy>,

    pub moving_window: usize,
    pub moving_stride: usize,
    pub chunk_lengths: Vec<usize>,
    pub stationarity_alpha: Alpha,
    /// Series tested per channel; 0 tests every frequency.
    pub subcarriers_per_channel: usize,
    pub adf_lags: usize,

    pub acf_lags: Vec<usize>,
    pub acf_long_lag: usize,
    pub acf_alpha: f64,
    pub ljung_box_lags: usize,

    pub fit_families: Vec<Family>,
    pub fit_per_frequency: bool,

    pub burst_thresholds: Vec<f64>,
    pub burst_fit_min_length: u64,
    pub burst_fit_max_length: u64,

    pub synth_mu: f64,
    pub synth_sigma: f64,
    pub synth_nu: f64,
    pub synth_kappa: f64,
    pub synth_band_half_width: f64,
    pub synth_ticks: u64,
    /// Empty selects every grid frequency.
    pub synth_frequencies: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            format: InputFormat::Auto,
            output_dir: PathBuf::from("report"),
            threads: 0,
            seed: 1,
            stages: Stage::ALL.to_vec(),
            grid_frequencies: DEFAULT_FREQUENCY_COUNT,
            grid_start_hz: DEFAULT_START_HZ,
            grid_end_hz: DEFAULT_END_HZ,
            grid_channels: DEFAULT_CHANNELS,
            quant_bin_width: 0.1,
            quant_min: -20.0,
            quant_max: 120.0,
            region_boundaries_hz: DEFAULT_REGION_BOUNDARIES_HZ.to_vec(),
            sampling_period_s: 1.0,
            gap_policy: None,
            moving_window: 3600,
            moving_stride: 60,
            chunk_lengths: DEFAULT_CHUNK_LENGTHS.to_vec(),
            stationarity_alpha: Alpha::P05,
            subcarriers_per_channel: 1,
            adf_lags: 1,
            acf_lags: vec![1, 2, 5, 10],
            acf_long_lag: 3600,
            acf_alpha: 0.05,
            ljung_box_lags: 10,
            fit_families: Family::ALL.to_vec(),
            fit_per_frequency: false,
            burst_thresholds: vec![0.0, 1.0, 2.0, 3.0],
            burst_fit_min_length: 2,
            burst_fit_max_length: 100,
            synth_mu: REFERENCE_STEP.0,
            synth_sigma: REFERENCE_STEP.1,
            synth_nu: REFERENCE_STEP.2,
            synth_kappa: DEFAULT_KAPPA,
            synth_band_half_width: DEFAULT_BAND_HALF_WIDTH,
            synth_ticks: 3600,
            synth_frequencies: Vec::new(),
        }
    }
}

fn list<T: ToString>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", v.trim())))
        })
        .collect()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", value.trim())))
}

impl RunConfig {
    pub const KEYS: [&'static str; 41] = [
        "input",
        "format",
        "output_dir",
        "threads",
        "seed",
        "stages",
        "grid.frequencies",
        "grid.start_hz",
        "grid.end_hz",
        "grid.channels",
        "quantization.bin_width",
        "quantization.min",
        "quantization.max",
        "regions.boundaries_hz",
        "sampling.period_s",
        "gap.policy",
        "moving.window",
        "moving.stride",
        "stationarity.chunk_lengths",
        "stationarity.alpha",
        "stationarity.subcarriers_per_channel",
        "stationarity.adf_lags",
        "acf.lags",
        "acf.long_lag",
        "acf.alpha",
        "ljung_box.lags",
        "fit.families",
        "fit.per_frequency",
        "bursts.thresholds",
        "bursts.fit_min_length",
        "bursts.fit_max_length",
        "synth.mu",
        "synth.sigma",
        "synth.nu",
        "synth.kappa",
        "synth.band_half_width",
        "synth.ticks",
        "synth.frequencies",
        // accepted aliases
        "inputs",
        "output",
        "out",
    ];

    /// Value of `key` in text form.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "input" | "inputs" => list(&self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
            "format" => match self.format {
                InputFormat::Auto => "auto".into(),
                InputFormat::Fixed(f) => f.as_str().into(),
            },
            "output_dir" | "output" | "out" => self.output_dir.display().to_string(),
            "threads" => self.threads.to_string(),
            "seed" => self.seed.to_string(),
            "stages" => list(&self.stages.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
            "grid.frequencies" => self.grid_frequencies.to_string(),
            "grid.start_hz" => self.grid_start_hz.to_string(),
            "grid.end_hz" => self.grid_end_hz.to_string(),
            "grid.channels" => self.grid_channels.to_string(),
            "quantization.bin_width" => self.quant_bin_width.to_string(),
            "quantization.min" => self.quant_min.to_string(),
            "quantization.max" => self.quant_max.to_string(),
            "regions.boundaries_hz" => list(&self.region_boundaries_hz),
            "sampling.period_s" => self.sampling_period_s.to_string(),
            "gap.policy" => self.gap_policy.map_or("none".into(), |p| p.to_string()),
            "moving.window" => self.moving_window.to_string(),
            "moving.stride" => self.moving_stride.to_string(),
            "stationarity.chunk_lengths" => list(&self.chunk_lengths),
            "stationarity.alpha" => self.stationarity_alpha.to_string(),
            "stationarity.subcarriers_per_channel" => self.subcarriers_per_channel.to_string(),
            "stationarity.adf_lags" => self.adf_lags.to_string(),
            "acf.lags" => list(&self.acf_lags),
            "acf.long_lag" => self.acf_long_lag.to_string(),
            "acf.alpha" => self.acf_alpha.to_string(),
            "ljung_box.lags" => self.ljung_box_lags.to_string(),
            "fit.families" => list(&self.fit_families),
            "fit.per_frequency" => self.fit_per_frequency.to_string(),
            "bursts.thresholds" => list(&self.burst_thresholds),
            "bursts.fit_min_length" => self.burst_fit_min_length.to_string(),
            "bursts.fit_max_length" => self.burst_fit_max_length.to_string(),
            "synth.mu" => self.synth_mu.to_string(),
            "synth.sigma" => self.synth_sigma.to_string(),
            "synth.nu" => self.synth_nu.to_string(),
            "synth.kappa" => self.synth_kappa.to_string(),
            "synth.band_half_width" => self.synth_band_half_width.to_string(),
            "synth.ticks" => self.synth_ticks.to_string(),
            "synth.frequencies" => list(&self.synth_frequencies),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        })
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input" | "inputs" => {
                self.inputs = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|p| PathBuf::from(p.trim())).collect()
                }
            }
            "format" => {
                self.format = match v {
                    "auto" => InputFormat::Auto,
                    other => InputFormat::Fixed(other.parse()?),
                }
            }
            "output_dir" | "output" | "out" => self.output_dir = PathBuf::from(v),
            "threads" => self.threads = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "stages" => self.stages = parse_list(key, v)?,
            "grid.frequencies" => self.grid_frequencies = parse(key, v)?,
            "grid.start_hz" => self.grid_start_hz = parse(key, v)?,
            "grid.end_hz" => self.grid_end_hz = parse(key, v)?,
            "grid.channels" => self.grid_channels = parse(key, v)?,
            "quantization.bin_width" => self.quant_bin_width = parse(key, v)?,
            "quantization.min" => self.quant_min = parse(key, v)?,
            "quantization.max" => self.quant_max = parse(key, v)?,
            "regions.boundaries_hz" => self.region_boundaries_hz = parse_list(key, v)?,
            "sampling.period_s" => self.sampling_period_s = parse(key, v)?,
            "gap.policy" => {
                self.gap_policy = match v {
                    "none" => None,
                    other => Some(other.parse()?),
                }
            }
            "moving.window" => self.moving_window = parse(key, v)?,
            "moving.stride" => self.moving_stride = parse(key, v)?,
            "stationarity.chunk_lengths" => self.chunk_lengths = parse_list(key, v)?,
            "stationarity.alpha" => self.stationarity_alpha = v.parse()?,
            "stationarity.subcarriers_per_channel" => self.subcarriers_per_channel = parse(key, v)?,
            "stationarity.adf_lags" => self.adf_lags = parse(key, v)?,
            "acf.lags" => self.acf_lags = parse_list(key, v)?,
            "acf.long_lag" => self.acf_long_lag = parse(key, v)?,
            "acf.alpha" => self.acf_alpha = parse(key, v)?,
            "ljung_box.lags" => self.ljung_box_lags = parse(key, v)?,
            "fit.families" => self.fit_families = parse_list(key, v)?,
            "fit.per_frequency" => self.fit_per_frequency = parse(key, v)?,
            "bursts.thresholds" => self.burst_thresholds = parse_list(key, v)?,
            "bursts.fit_min_length" => self.burst_fit_min_length = parse(key, v)?,
            "bursts.fit_max_length" => self.burst_fit_max_length = parse(key, v)?,
            "synth.mu" => self.synth_mu = parse(key, v)?,
            "synth.sigma" => self.synth_sigma = parse(key, v)?,
            "synth.nu" => self.synth_nu = parse(key, v)?,
            "synth.kappa" => self.synth_kappa = parse(key, v)?,
            "synth.band_half_width" => self.synth_band_half_width = parse(key, v)?,
            "synth.ticks" => self.synth_ticks = parse(key, v)?,
            "synth.frequencies" => self.synth_frequencies = parse_list(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
        self.set(k.trim(), v)
    }

    /// Parses the text form on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("configuration error: "))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Full text form with every key, in a stable order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in &Self::KEYS[..Self::KEYS.len() - 3] {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::prime(self.grid_frequencies, self.grid_start_hz, self.grid_end_hz, self.grid_channels)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn quantization(&self) -> Result<QuantizationPolicy> {
        QuantizationPolicy::new(self.quant_bin_width, self.quant_min, self.quant_max)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Cross-field checks that do not need the input data.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.quantization()?;
        if grid.count() > u16::MAX as usize + 1 {
            return Err(Error::Config("grid larger than the 16-bit frequency index".into()));
        }
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.sampling_period_s > 0.0) {
            return bad("sampling.period_s must be positive");
        }
        if self.moving_window < 2 || self.moving_stride == 0 {
            return bad("moving.window must be >= 2 and moving.stride >= 1");
        }
        if self.chunk_lengths.iter().any(|&c| c < 10) {
            return bad("stationarity.chunk_lengths must all be >= 10");
        }
        if self.acf_lags.contains(&0) || self.ljung_box_lags == 0 {
            return bad("ACF and Ljung-Box lags must be >= 1");
        }
        if !(self.acf_alpha > 0.0 && self.acf_alpha < 1.0) {
            return bad("acf.alpha must lie in (0, 1)");
        }
        if self.fit_families.is_empty() {
            return bad("fit.families must not be empty");
        }
        if self.burst_thresholds.iter().any(|d| !(*d >= 0.0)) {
            return bad("bursts.thresholds must be non-negative");
        }
        if self.burst_fit_min_length == 0 || self.burst_fit_min_length >= self.burst_fit_max_length {
            return bad("bursts.fit_min_length must be >= 1 and below bursts.fit_max_length");
        }
        if self.synth_frequencies.iter().any(|&f| f >= grid.count()) {
            return bad("synth.frequencies outside the grid");
        }
        if !(0.0..1.0).contains(&self.synth_kappa) {
            return bad("synth.kappa must lie in [0, 1)");
        }
        for &b in &self.region_boundaries_hz {
            if !(b > grid.start_hz() && b < grid.end_hz()) {
                return Err(Error::Config(format!("region boundary {b} Hz outside the grid")));
            }
        }
        Ok(())
    }
}
