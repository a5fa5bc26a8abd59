//! Mergeable per-frequency accumulators for the quantile spectrum, the global
//! level distribution, and sliding first/second-order statistics.
//!
//! Quantiles are exact at the quantization resolution: every frequency keeps a
//! full histogram over the bounded level range, so merging shards and then
//! summarizing gives the same answer as summarizing the concatenated data.

mod moving;
mod regions;

use serde::{Deserialize, Serialize};

pub use moving::{moving_stats, MovingStats};
pub use regions::segment_regions;

use crate::error::{invalid, Result};
use crate::grid::{NoiseSample, QuantizationPolicy};
use crate::ingest::lower_rank;

/// Running aggregates for one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAccumulator {
    hist: Vec<u64>,
    count: u64,
    min: f64,
    max: f64,
    mean: f64,
    m2: f64,
    sum: f64,
    sum_comp: f64,
}

impl FrequencyAccumulator {
    pub fn new(bins: usize) -> Self {
        Self {
            hist: vec![0; bins],
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            m2: 0.0,
            sum: 0.0,
            sum_comp: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, bin: usize, x: f64) {
        self.hist[bin] += 1;
        self.count += 1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        // Neumaier summation
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.sum_comp += (self.sum - t) + x;
        } else {
            self.sum_comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        let (s, c) = two_sum(self.sum, other.sum);
        self.sum = s;
        self.sum_comp += c + other.sum_comp;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn histogram(&self) -> &[u64] {
        &self.hist
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Sample variance (`n - 1` divisor).
    pub fn variance(&self) -> Option<f64> {
        (self.count > 1).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    /// Compensated running sum of the levels.
    pub fn compensated_sum(&self) -> f64 {
        self.sum + self.sum_comp
    }

    /// Bin holding the lower-interpolated `p` quantile.
    pub fn quantile_bin(&self, p: f64) -> Option<usize> {
        if self.count == 0 {
            return None;
        }
        let rank = lower_rank(p, self.count);
        let mut acc = 0;
        for (b, &c) in self.hist.iter().enumerate() {
            acc += c;
            if acc >= rank {
                return Some(b);
            }
        }
        None
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Per-frequency `{min, q10, q50, q90, max}` plus moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub min: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample variance; `None` with a single observation.
    pub variance: Option<f64>,
    pub count: u64,
}

/// Histogram + moment accumulator over every grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAccumulator {
    policy: QuantizationPolicy,
    freqs: Vec<FrequencyAccumulator>,
    total: u64,
}

impl SpectralAccumulator {
    pub fn new(policy: QuantizationPolicy, frequencies: usize) -> Self {
        let bins = policy.bin_count();
        Self {
            policy,
            freqs: (0..frequencies).map(|_| FrequencyAccumulator::new(bins)).collect(),
            total: 0,
        }
    }

    pub fn policy(&self) -> &QuantizationPolicy {
        &self.policy
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequencies(&self) -> &[FrequencyAccumulator] {
        &self.freqs
    }

    pub fn frequency(&self, index: usize) -> Option<&FrequencyAccumulator> {
        self.freqs.get(index)
    }

    /// Adds one sample in O(1).
    pub fn accumulate(&mut self, sample: &NoiseSample) -> Result<()> {
        let bin = self.policy.quantize(sample.level)?;
        let acc = self
            .freqs
            .get_mut(sample.freq_index as usize)
            .ok_or_else(|| invalid(format!("frequency {} outside accumulator", sample.freq_index)))?;
        acc.push(bin, sample.level);
        self.total += 1;
        Ok(())
    }

    /// Adds a whole series for one frequency.
    pub fn accumulate_series(&mut self, freq_index: usize, levels: &[f64]) -> Result<()> {
        let policy = self.policy;
        let acc = self
            .freqs
            .get_mut(freq_index)
            .ok_or_else(|| invalid(format!("frequency {freq_index} outside accumulator")))?;
        for &x in levels {
            acc.push(policy.quantize(x)?, x);
        }
        self.total += levels.len() as u64;
        Ok(())
    }

    /// Replaces one frequency's aggregates with a separately built shard.
    pub fn absorb(&mut self, freq_index: usize, shard: FrequencyAccumulator) -> Result<()> {
        let slot = self
            .freqs
            .get_mut(freq_index)
            .ok_or_else(|| invalid(format!("frequency {freq_index} outside accumulator")))?;
        if shard.hist.len() != slot.hist.len() {
            return Err(invalid("shard histogram does not match quantization policy"));
        }
        self.total += shard.count;
        slot.merge(&shard);
        Ok(())
    }

    /// Builds a single-frequency shard from a series.
    pub fn shard(policy: &QuantizationPolicy, levels: &[f64]) -> Result<FrequencyAccumulator> {
        let mut acc = FrequencyAccumulator::new(policy.bin_count());
        for &x in levels {
            acc.push(policy.quantize(x)?, x);
        }
        Ok(acc)
    }

    /// Merges another accumulator built with the same policy and grid.
    pub fn merge(&mut self, other: &SpectralAccumulator) -> Result<()> {
        if self.policy != other.policy || self.freqs.len() != other.freqs.len() {
            return Err(invalid("cannot merge accumulators with different layouts"));
        }
        for (a, b) in self.freqs.iter_mut().zip(&other.freqs) {
            a.merge(b);
        }
        self.total += other.total;
        Ok(())
    }

    fn value_at(&self, acc: &FrequencyAccumulator, p: f64) -> f64 {
        let bin = acc.quantile_bin(p).expect("non-empty");
        self.policy.bin_lower(bin).clamp(acc.min, acc.max)
    }

    /// Quantile summary per frequency; empty frequencies are `None`.
    pub fn frequency_summary(&self) -> Vec<Option<FrequencySummary>> {
        self.freqs
            .iter()
            .map(|acc| {
                (acc.count > 0).then(|| FrequencySummary {
                    min: acc.min,
                    q10: self.value_at(acc, 0.10),
                    q50: self.value_at(acc, 0.50),
                    q90: self.value_at(acc, 0.90),
                    max: acc.max,
                    mean: acc.mean,
                    variance: acc.variance(),
                    count: acc.count,
                })
            })
            .collect()
    }

    /// Pooled level distribution over all frequencies.
    pub fn global_distribution(&self) -> Result<GlobalDistribution> {
        if self.total == 0 {
            return Err(invalid("no samples accumulated"));
        }
        let mut counts = vec![0u64; self.policy.bin_count()];
        for acc in &self.freqs {
            for (c, h) in counts.iter_mut().zip(&acc.hist) {
                *c += h;
            }
        }
        Ok(GlobalDistribution::from_counts(self.policy, counts))
    }
}

/// Probability mass and cumulative distribution over quantization bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalDistribution {
    pub policy: QuantizationPolicy,
    pub counts: Vec<u64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub total: u64,
}

impl GlobalDistribution {
    pub fn from_counts(policy: QuantizationPolicy, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let pdf: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let mut acc = 0u64;
        let cdf = counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / total as f64
            })
            .collect();
        Self {
            policy,
            counts,
            pdf,
            cdf,
            total,
        }
    }

    /// Bin of the lower-interpolated `p` quantile (CDF inverse).
    pub fn quantile_bin(&self, p: f64) -> usize {
        let rank = lower_rank(p, self.total);
        let mut acc = 0;
        for (b, &c) in self.counts.iter().enumerate() {
            acc += c;
            if acc >= rank {
                return b;
            }
        }
        self.counts.len() - 1
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.policy.bin_lower(self.quantile_bin(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn policy() -> QuantizationPolicy {
        QuantizationPolicy::default()
    }

    /// Sort-based oracle: smallest value whose empirical CDF reaches p.
    fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
        let n = sorted.len();
        let i = (1..=n).find(|&i| i as f64 / n as f64 >= p).unwrap();
        sorted[i - 1]
    }

    #[test]
    fn single_sample() {
        let mut acc = SpectralAccumulator::new(policy(), 2);
        acc.accumulate(&NoiseSample::new(0.0, 1, 68.0)).unwrap();
        let s = acc.frequency_summary()[1].unwrap();
        assert_eq!((s.min, s.q50, s.max), (68.0, 68.0, 68.0));
        assert!(acc.frequency_summary()[0].is_none());
    }

    #[test]
    fn two_samples_sample_variance() {
        let mut acc = SpectralAccumulator::new(policy(), 1);
        acc.accumulate(&NoiseSample::new(0.0, 0, 30.0)).unwrap();
        acc.accumulate(&NoiseSample::new(1.0, 0, 40.0)).unwrap();
        let s = acc.frequency_summary()[0].unwrap();
        assert_eq!(s.mean, 35.0);
        assert_eq!(s.variance, Some(50.0));
    }

    #[test]
    fn constant_trace_all_statistics_equal() {
        let mut acc = SpectralAccumulator::new(policy(), 1);
        acc.accumulate_series(0, &[42.37; 100]).unwrap();
        let s = acc.frequency_summary()[0].unwrap();
        for v in [s.min, s.q10, s.q50, s.q90, s.max] {
            assert_eq!(v, 42.37);
        }
    }

    #[test]
    fn histogram_quantiles_match_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = policy();
        let levels: Vec<f64> = (0..100_000).map(|_| rng.random_range(-20.0..120.0)).collect();
        let mut acc = SpectralAccumulator::new(q, 1);
        acc.accumulate_series(0, &levels).unwrap();
        let mut sorted = levels.clone();
        sorted.sort_by(f64::total_cmp);
        let f = &acc.frequencies()[0];
        for p in [0.1, 0.5, 0.9] {
            let oracle_bin = q.quantize(sorted_quantile(&sorted, p)).unwrap();
            assert_eq!(f.quantile_bin(p), Some(oracle_bin), "p={p}");
        }
    }

    #[test]
    fn r1_like_gaussian_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(68.0, 8.0).unwrap();
        let q = policy();
        let levels: Vec<f64> = (0..200_000).map(|_| q.snap(n.sample(&mut rng))).collect();
        let mut acc = SpectralAccumulator::new(q, 1);
        acc.accumulate_series(0, &levels).unwrap();
        let s = acc.frequency_summary()[0].unwrap();
        let mut sorted = levels;
        sorted.sort_by(f64::total_cmp);
        assert_eq!(s.q50, sorted_quantile(&sorted, 0.5));
        assert!((s.q50 - 68.0).abs() <= 0.2, "{}", s.q50);
        let spread = s.q90 - s.q10;
        assert!((spread - 20.5).abs() <= 0.5, "{spread}");
    }

    #[test]
    fn merge_matches_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let q = policy();
        let mut a = SpectralAccumulator::new(q, 3);
        let mut b = SpectralAccumulator::new(q, 3);
        let mut all = SpectralAccumulator::new(q, 3);
        for i in 0..30_000 {
            let s = NoiseSample::new(i as f64, (i % 3) as u16, q.snap(rng.random_range(0.0..90.0)));
            if i % 7 < 3 { a.accumulate(&s).unwrap() } else { b.accumulate(&s).unwrap() }
            all.accumulate(&s).unwrap();
        }
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        for m in [&ab, &ba] {
            for (x, y) in m.frequency_summary().iter().zip(all.frequency_summary()) {
                let (x, y) = (x.unwrap(), y.unwrap());
                assert_eq!((x.min, x.q10, x.q50, x.q90, x.max), (y.min, y.q10, y.q50, y.q90, y.max));
                assert!((x.mean - y.mean).abs() <= 1e-9 * y.mean.abs());
                let (vx, vy) = (x.variance.unwrap(), y.variance.unwrap());
                assert!((vx - vy).abs() <= 1e-9 * vy);
            }
        }
        assert_eq!(ab.total(), 30_000);
    }

    #[test]
    fn count_times_mean_matches_compensated_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut acc = SpectralAccumulator::new(policy(), 1);
        let levels: Vec<f64> = (0..50_000).map(|_| rng.random_range(10.0..110.0)).collect();
        acc.accumulate_series(0, &levels).unwrap();
        let f = &acc.frequencies()[0];
        let lhs = f.count() as f64 * f.mean().unwrap();
        assert!((lhs - f.compensated_sum()).abs() <= 1e-9 * lhs.abs());
    }

    #[test]
    fn global_distribution_point_mass() {
        let mut acc = SpectralAccumulator::new(policy(), 2);
        acc.accumulate_series(0, &[25.0; 10]).unwrap();
        acc.accumulate_series(1, &[25.0; 5]).unwrap();
        let g = acc.global_distribution().unwrap();
        let b = policy().quantize(25.0).unwrap();
        assert_eq!(g.pdf[b], 1.0);
        assert_eq!(g.pdf.iter().filter(|&&p| p > 0.0).count(), 1);
        assert_eq!(*g.cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_level_rejected() {
        let mut acc = SpectralAccumulator::new(policy(), 1);
        assert!(acc.accumulate(&NoiseSample::new(0.0, 0, 500.0)).is_err());
        assert!(acc.accumulate(&NoiseSample::new(0.0, 4, 50.0)).is_err());
        assert!(acc.global_distribution().is_err());
    }
}
