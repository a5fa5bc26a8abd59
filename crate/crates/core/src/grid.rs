//! Domain types shared by every analysis stage: samples, the PRIME-band
//! frequency grid with its channel plan, the level quantization policy and
//! spectral regions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default number of monitored frequencies.
pub const DEFAULT_FREQUENCY_COUNT: usize = 776;
/// First monitored frequency in Hz.
pub const DEFAULT_START_HZ: f64 = 41_992.0;
/// Last monitored frequency in Hz.
pub const DEFAULT_END_HZ: f64 = 471_680.0;
/// Number of PRIME channels.
pub const DEFAULT_CHANNELS: usize = 8;

/// One noise measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    /// Seconds since the trace epoch.
    pub timestamp: f64,
    pub freq_index: u16,
    /// Noise level in dBµV.
    pub level: f64,
}

impl NoiseSample {
    pub fn new(timestamp: f64, freq_index: u16, level: f64) -> Self {
        Self {
            timestamp,
            freq_index,
            level,
        }
    }
}

/// Validation limits applied to samples during ingest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBounds {
    pub freq_count: usize,
    pub level_min: f64,
    pub level_max: f64,
}

impl SampleBounds {
    pub fn new(grid: &FrequencyGrid, policy: &QuantizationPolicy) -> Self {
        Self {
            freq_count: grid.count(),
            level_min: policy.min(),
            level_max: policy.max(),
        }
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self, s: &NoiseSample) -> std::result::Result<(), String> {
        if !s.timestamp.is_finite() || s.timestamp < 0.0 {
            return Err(format!("timestamp {} is negative or non-finite", s.timestamp));
        }
        if s.freq_index as usize >= self.freq_count {
            return Err(format!(
                "freq_index {} outside grid of {} frequencies",
                s.freq_index, self.freq_count
            ));
        }
        if !s.level.is_finite() || s.level < self.level_min || s.level > self.level_max {
            return Err(format!(
                "level {} outside representable range [{}, {}]",
                s.level, self.level_min, self.level_max
            ));
        }
        Ok(())
    }
}

/// Linearly spaced frequency grid partitioned into contiguous channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    count: usize,
    start_hz: f64,
    end_hz: f64,
    /// Channel edges in Hz: channel `c` (1-based) spans `[edges[c-1], edges[c])`,
    /// the last channel is closed on the right.
    channel_edges: Vec<f64>,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::prime(DEFAULT_FREQUENCY_COUNT, DEFAULT_START_HZ, DEFAULT_END_HZ, DEFAULT_CHANNELS)
            .expect("default grid is valid")
    }
}

impl FrequencyGrid {
    /// Grid whose channels each hold an equal share of consecutive grid points,
    /// with edges placed halfway between neighbouring points.
    pub fn prime(count: usize, start_hz: f64, end_hz: f64, channels: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("grid needs at least one frequency"));
        }
        if channels == 0 || channels > count {
            return Err(invalid(format!(
                "cannot split {count} frequencies into {channels} channels"
            )));
        }
        let step = if count > 1 {
            (end_hz - start_hz) / (count - 1) as f64
        } else {
            1.0
        };
        let mut edges = Vec::with_capacity(channels + 1);
        edges.push(start_hz - step / 2.0);
        for c in 1..channels {
            let boundary_index = c * count / channels;
            let lo = start_hz + step * (boundary_index - 1) as f64;
            edges.push(lo + step / 2.0);
        }
        edges.push(end_hz + step / 2.0);
        Self::with_channel_edges(count, start_hz, end_hz, edges)
    }

    /// Grid with explicit channel edges (`channels + 1` increasing values).
    pub fn with_channel_edges(
        count: usize,
        start_hz: f64,
        end_hz: f64,
        channel_edges: Vec<f64>,
    ) -> Result<Self> {
        if count == 0 {
            return Err(invalid("grid needs at least one frequency"));
        }
        if !start_hz.is_finite() || !end_hz.is_finite() {
            return Err(invalid("grid endpoints must be finite"));
        }
        if count > 1 && end_hz <= start_hz {
            return Err(invalid("grid end must exceed grid start"));
        }
        if count == 1 && end_hz != start_hz {
            return Err(invalid("single-point grid needs start == end"));
        }
        if count > u16::MAX as usize + 1 {
            return Err(invalid("grid too large for 16-bit frequency indices"));
        }
        if channel_edges.len() < 2 {
            return Err(invalid("need at least two channel edges"));
        }
        if channel_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("channel edges must be strictly increasing"));
        }
        let grid = Self {
            count,
            start_hz,
            end_hz,
            channel_edges,
        };
        let first = grid.channel_edges[0];
        let last = *grid.channel_edges.last().unwrap();
        if grid.frequency(0) < first || grid.frequency(count - 1) > last {
            return Err(invalid(format!(
                "channel edges [{first}, {last}] do not cover the grid [{start_hz}, {end_hz}]"
            )));
        }
        Ok(grid)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn start_hz(&self) -> f64 {
        self.start_hz
    }

    pub fn end_hz(&self) -> f64 {
        self.end_hz
    }

    pub fn step_hz(&self) -> f64 {
        if self.count > 1 {
            (self.end_hz - self.start_hz) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channel_edges.len() - 1
    }

    pub fn channel_edges(&self) -> &[f64] {
        &self.channel_edges
    }

    /// `(low_hz, high_hz)` of a 1-based channel.
    pub fn channel_bounds(&self, channel: usize) -> Option<(f64, f64)> {
        if channel == 0 || channel > self.channel_count() {
            return None;
        }
        Some((self.channel_edges[channel - 1], self.channel_edges[channel]))
    }

    /// Frequency of a grid index in Hz. The last index maps to `end_hz` exactly.
    pub fn frequency(&self, index: usize) -> f64 {
        if index + 1 == self.count {
            self.end_hz
        } else {
            self.start_hz + (self.end_hz - self.start_hz) * index as f64 / (self.count - 1).max(1) as f64
        }
    }

    /// Nearest grid index to a frequency, if the frequency lies within half a
    /// step of the grid.
    pub fn index_of_hz(&self, hz: f64) -> Option<usize> {
        if self.count == 1 {
            return (hz == self.start_hz).then_some(0);
        }
        let pos = (hz - self.start_hz) / self.step_hz();
        let idx = pos.round();
        if idx < 0.0 || idx >= self.count as f64 {
            return None;
        }
        Some(idx as usize)
    }

    /// 1-based channel holding the frequency at `freq_index`.
    pub fn channel_of(&self, freq_index: usize) -> Result<usize> {
        if freq_index >= self.count {
            return Err(invalid(format!(
                "frequency index {freq_index} outside grid of {} points",
                self.count
            )));
        }
        self.channel_of_hz(self.frequency(freq_index))
    }

    /// 1-based channel whose `[low, high)` interval contains `hz`.
    pub fn channel_of_hz(&self, hz: f64) -> Result<usize> {
        let edges = &self.channel_edges;
        let last = edges.len() - 1;
        if !(hz >= edges[0] && hz <= edges[last]) {
            return Err(invalid(format!("{hz} Hz lies outside every channel")));
        }
        // upper bound: first edge strictly greater than hz
        let pos = edges.partition_point(|&e| e <= hz);
        Ok(pos.clamp(1, last))
    }

    /// Grid indices that belong to a 1-based channel.
    pub fn channel_indices(&self, channel: usize) -> Vec<usize> {
        (0..self.count)
            .filter(|&i| self.channel_of(i).ok() == Some(channel))
            .collect()
    }
}

/// Fixed-width binning of noise levels over a bounded range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationPolicy {
    bin_width: f64,
    min: f64,
    max: f64,
}

impl Default for QuantizationPolicy {
    fn default() -> Self {
        Self {
            bin_width: 0.1,
            min: -20.0,
            max: 120.0,
        }
    }
}

/// Relative slack used when snapping values that sit on a bin edge up to
/// floating-point noise.
const EDGE_SNAP: f64 = 1e-9;

impl QuantizationPolicy {
    pub fn new(bin_width: f64, min: f64, max: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(invalid("bin width must be positive and finite"));
        }
        if !min.is_finite() || !max.is_finite() || max <= min {
            return Err(invalid("quantization range must be finite with max > min"));
        }
        let bins = (max - min) / bin_width;
        if (bins - bins.round()).abs() > EDGE_SNAP * bins.max(1.0) {
            return Err(invalid(format!(
                "range width {} is not an integer multiple of bin width {bin_width}",
                max - min
            )));
        }
        Ok(Self { bin_width, min, max })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn bin_count(&self) -> usize {
        ((self.max - self.min) / self.bin_width).round() as usize
    }

    /// Bin index of a level: `floor((level - min) / bin_width)`, with the
    /// upper range boundary mapped to the last bin.
    pub fn quantize(&self, level: f64) -> Result<usize> {
        if !level.is_finite() {
            return Err(invalid(format!("non-finite level {level}")));
        }
        if level < self.min || level > self.max {
            return Err(invalid(format!(
                "level {level} outside [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(self.bin_unchecked(level))
    }

    #[inline]
    pub(crate) fn bin_unchecked(&self, level: f64) -> usize {
        let x = (level - self.min) / self.bin_width;
        let nearest = x.round();
        let b = if (x - nearest).abs() <= EDGE_SNAP * nearest.max(1.0) {
            nearest
        } else {
            x.floor()
        };
        (b.max(0.0) as usize).min(self.bin_count() - 1)
    }

    /// Centre of a bin.
    pub fn dequantize(&self, bin: usize) -> f64 {
        self.min + (bin as f64 + 0.5) * self.bin_width
    }

    /// Lower edge of a bin. When the range starts on a grid tick the edge is
    /// the exact tick value, so edges compare equal to snapped levels.
    pub fn bin_lower(&self, bin: usize) -> f64 {
        let start = self.min / self.bin_width;
        if (start - start.round()).abs() < 1e-9 {
            self.from_ticks(start.round() as i64 + bin as i64)
        } else {
            self.min + bin as f64 * self.bin_width
        }
    }

    /// Nearest grid tick (multiple of `bin_width`) of a value.
    pub fn to_ticks(&self, value: f64) -> i64 {
        (value / self.bin_width).round() as i64
    }

    /// Level of a grid tick. When `1 / bin_width` is an integer the division
    /// form is used so that e.g. tick 683 at 0.1 resolution is exactly `68.3`.
    pub fn from_ticks(&self, ticks: i64) -> f64 {
        let inv = 1.0 / self.bin_width;
        if (inv - inv.round()).abs() < 1e-12 * inv {
            ticks as f64 / inv.round()
        } else {
            ticks as f64 * self.bin_width
        }
    }

    /// Rounds a value to the nearest grid tick.
    pub fn snap(&self, value: f64) -> f64 {
        self.from_ticks(self.to_ticks(value))
    }
}

/// Identifier of a spectral region (1-based, printed as `R1`, `R2`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId(pub u8);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

/// A contiguous band of frequencies with similar noise behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Number of grid frequencies inside the region.
    pub frequencies: usize,
    /// Median of the per-frequency medians, `None` when no frequency has data.
    pub median_level: Option<f64>,
    /// Mean of per-frequency `q90 - q10`.
    pub spread_q90_q10: Option<f64>,
}

/// Default region boundaries (Hz) separating R1..R4.
pub const DEFAULT_REGION_BOUNDARIES_HZ: [f64; 3] = [95_000.0, 200_000.0, 300_000.0];
