use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::NoiseSample;

/// One histogram bin: representative value and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub value_s: f64,
    pub count: u64,
}

/// Sampling-period quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub nominal_period_s: f64,
    pub resolution_s: f64,
    /// Pooled histogram of consecutive-timestamp gaps.
    pub gap_histogram: Vec<HistogramBin>,
    /// Pooled histogram of `|gap - nominal_period|`.
    pub abs_error_histogram: Vec<HistogramBin>,
    pub mode_gap_s: f64,
    pub q95_abs_error_s: f64,
    /// Consecutive pairs analysed.
    pub pairs: u64,
    pub frequencies_covered: usize,
    pub samples: u64,
}

impl GapReport {
    /// Lower-interpolated quantile of the absolute error: the smallest value
    /// whose empirical CDF reaches `p`.
    pub fn abs_error_quantile(&self, p: f64) -> f64 {
        lower_quantile(&self.abs_error_histogram, self.pairs, p)
    }

    /// Empirical CDF of the absolute error, one point per histogram bin.
    pub fn abs_error_cdf(&self) -> Vec<(f64, f64)> {
        let mut acc = 0u64;
        self.abs_error_histogram
            .iter()
            .map(|b| {
                acc += b.count;
                (b.value_s, acc as f64 / self.pairs as f64)
            })
            .collect()
    }
}

/// Rank (1-based) of the lower-interpolated `p` quantile among `n` values.
pub(crate) fn lower_rank(p: f64, n: u64) -> u64 {
    ((p * n as f64 - 1e-9).ceil() as u64).clamp(1, n.max(1))
}

fn lower_quantile(hist: &[HistogramBin], n: u64, p: f64) -> f64 {
    let rank = lower_rank(p, n);
    let mut acc = 0;
    for b in hist {
        acc += b.count;
        if acc >= rank {
            return b.value_s;
        }
    }
    hist.last().map(|b| b.value_s).unwrap_or(f64::NAN)
}

/// Streaming gap analysis; keeps one timestamp per frequency.
#[derive(Debug, Clone)]
pub struct GapAnalyzer {
    nominal: f64,
    resolution: f64,
    last: Vec<Option<f64>>,
    counts: Vec<u64>,
    gaps: BTreeMap<i64, u64>,
    errors: BTreeMap<i64, u64>,
    pairs: u64,
}

impl GapAnalyzer {
    pub fn new(nominal_period: f64, resolution: f64) -> Result<Self> {
        if !(nominal_period > 0.0) || !(resolution > 0.0) {
            return Err(invalid("nominal period and resolution must be positive"));
        }
        Ok(Self {
            nominal: nominal_period,
            resolution,
            last: Vec::new(),
            counts: Vec::new(),
            gaps: BTreeMap::new(),
            errors: BTreeMap::new(),
            pairs: 0,
        })
    }

    pub fn push(&mut self, s: &NoiseSample) -> Result<()> {
        let f = s.freq_index as usize;
        if f >= self.last.len() {
            self.last.resize(f + 1, None);
            self.counts.resize(f + 1, 0);
        }
        self.counts[f] += 1;
        if let Some(prev) = self.last[f] {
            let gap = s.timestamp - prev;
            if gap < 0.0 {
                return Err(invalid(format!(
                    "timestamps decrease for frequency {f}: {prev} then {}",
                    s.timestamp
                )));
            }
            *self.gaps.entry((gap / self.resolution).round() as i64).or_default() += 1;
            let err = (gap - self.nominal).abs();
            *self.errors.entry((err / self.resolution).round() as i64).or_default() += 1;
            self.pairs += 1;
        }
        self.last[f] = Some(s.timestamp);
        Ok(())
    }

    /// Per-frequency sample counts seen so far, indexed by frequency.
    pub fn sample_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn finish(self) -> Result<GapReport> {
        if self.pairs == 0 {
            return Err(Error::EmptyReport(
                "no frequency has two or more samples".into(),
            ));
        }
        let to_bins = |m: &BTreeMap<i64, u64>| -> Vec<HistogramBin> {
            m.iter()
                .map(|(&k, &count)| HistogramBin {
                    value_s: k as f64 * self.resolution,
                    count,
                })
                .collect()
        };
        let gap_histogram = to_bins(&self.gaps);
        let abs_error_histogram = to_bins(&self.errors);
        let mode_gap_s = gap_histogram
            .iter()
            .fold(None::<HistogramBin>, |best, b| match best {
                Some(x) if x.count >= b.count => Some(x),
                _ => Some(*b),
            })
            .map(|b| b.value_s)
            .unwrap_or(f64::NAN);
        let mut report = GapReport {
            nominal_period_s: self.nominal,
            resolution_s: self.resolution,
            gap_histogram,
            abs_error_histogram,
            mode_gap_s,
            q95_abs_error_s: 0.0,
            pairs: self.pairs,
            frequencies_covered: self.counts.iter().filter(|&&c| c > 0).count(),
            samples: self.counts.iter().sum(),
        };
        report.q95_abs_error_s = report.abs_error_quantile(0.95);
        Ok(report)
    }
}

/// Computes the sampling-gap report of a sample stream.
pub fn sampling_gap_report<I>(stream: I, nominal_period: f64) -> Result<GapReport>
where
    I: IntoIterator<Item = Result<NoiseSample>>,
{
    let mut a = GapAnalyzer::new(nominal_period, 1e-3)?;
    for s in stream {
        a.push(&s?)?;
    }
    a.finish()
}
