use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::chi2_sf;

/// Run lengths (in steps) of maximal stretches with `|d(t)| <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstHistogram {
    pub threshold: f64,
    pub counts: BTreeMap<u64, u64>,
    pub total_runs: u64,
    /// Steps inspected, i.e. series length minus one, summed over merged series.
    pub steps: u64,
    /// Runs touching the start or end of a series, whose true length is unknown.
    pub censored_runs: u64,
}

const STEP_TOLERANCE: f64 = 1e-9;

impl BurstHistogram {
    pub fn empty(threshold: f64) -> Self {
        Self {
            threshold,
            counts: BTreeMap::new(),
            total_runs: 0,
            steps: 0,
            censored_runs: 0,
        }
    }

    /// Builds the histogram from a step series.
    pub fn from_steps(d: &[f64], threshold: f64) -> Self {
        let mut h = Self::empty(threshold);
        h.steps = d.len() as u64;
        let mut run = 0u64;
        let mut run_start = 0usize;
        for (i, v) in d.iter().enumerate() {
            if v.abs() <= threshold + STEP_TOLERANCE {
                if run == 0 {
                    run_start = i;
                }
                run += 1;
            } else if run > 0 {
                h.record(run, run_start == 0);
                run = 0;
            }
        }
        if run > 0 {
            h.record(run, true);
        }
        h
    }

    fn record(&mut self, len: u64, censored: bool) {
        *self.counts.entry(len).or_insert(0) += 1;
        self.total_runs += 1;
        if censored {
            self.censored_runs += 1;
        }
    }

    /// Adds another histogram's runs. Thresholds must match.
    pub fn merge(&mut self, other: &BurstHistogram) -> Result<()> {
        if (self.threshold - other.threshold).abs() > STEP_TOLERANCE {
            return Err(invalid(format!(
                "cannot merge burst histograms for D = {} and D = {}",
                self.threshold, other.threshold
            )));
        }
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.total_runs += other.total_runs;
        self.steps += other.steps;
        self.censored_runs += other.censored_runs;
        Ok(())
    }

    /// Steps covered by runs.
    pub fn covered_steps(&self) -> u64 {
        self.counts.iter().map(|(k, c)| k * c).sum()
    }

    pub fn max_length(&self) -> u64 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    /// `S(k) = P(L >= k)` for `k = 1..=max_length`.
    pub fn survival(&self) -> Vec<(u64, f64)> {
        let total = self.total_runs as f64;
        let mut remaining = self.total_runs;
        let mut out = Vec::with_capacity(self.max_length() as usize);
        for k in 1..=self.max_length() {
            out.push((k, remaining as f64 / total));
            remaining -= self.counts.get(&k).copied().unwrap_or(0);
        }
        out
    }

    /// `(length, count, normalized frequency)` for every observed length.
    pub fn frequencies(&self) -> Vec<(u64, u64, f64)> {
        let total = self.total_runs as f64;
        self.counts
            .iter()
            .map(|(&k, &c)| (k, c, c as f64 / total))
            .collect()
    }
}

/// Histogram of runs with `|n(t) - n(t-1)| <= threshold`.
pub fn burst_lengths(series: &[f64], threshold: f64) -> Result<BurstHistogram> {
    if series.len() < 2 {
        return Err(invalid("burst analysis needs at least 2 samples"));
    }
    if !(threshold >= 0.0) {
        return Err(invalid(format!("burst threshold {threshold} must be non-negative")));
    }
    let d: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(BurstHistogram::from_steps(&d, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    /// Per-step probability that a run ends; run length `L ~ Geometric(p)` on {1, 2, ...}.
    pub p: f64,
    pub goodness: Option<GoodnessOfFit>,
    /// Set when the histogram cannot support a goodness test.
    pub unreliable: bool,
}

const MIN_RUNS: u64 = 30;
const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square of the histogram against `Geometric(p)`, over bins with
/// expected count at least 5 and a pooled tail. `estimated` removes one extra
/// degree of freedom for a fitted `p`.
pub fn geometric_goodness(hist: &BurstHistogram, p: f64, estimated: bool) -> Option<GoodnessOfFit> {
    if !(p > 0.0 && p < 1.0) || hist.total_runs == 0 {
        return None;
    }
    let n = hist.total_runs as f64;
    let q = 1.0 - p;
    let mut expected = Vec::new();
    let mut observed = Vec::new();
    let mut k = 1u64;
    loop {
        let e = n * p * q.powi(k as i32 - 1);
        if e < MIN_EXPECTED {
            break;
        }
        expected.push(e);
        observed.push(hist.counts.get(&k).copied().unwrap_or(0) as f64);
        k += 1;
    }
    // tail P(L >= k)
    let tail_e = n * q.powi(k as i32 - 1);
    let tail_o = hist.counts.range(k..).map(|(_, c)| *c as f64).sum::<f64>();
    if tail_e >= MIN_EXPECTED || expected.is_empty() {
        expected.push(tail_e);
        observed.push(tail_o);
    } else {
        *expected.last_mut().unwrap() += tail_e;
        *observed.last_mut().unwrap() += tail_o;
    }
    let bins = expected.len();
    let lost = 1 + usize::from(estimated);
    if bins <= lost {
        return None;
    }
    let df = bins - lost;
    let chi2: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    Some(GoodnessOfFit {
        chi2,
        df,
        p_value: chi2_sf(chi2, df as f64),
        bins,
    })
}

/// Maximum-likelihood geometric fit, `p = runs / sum(length * count)`.
pub fn geometric_fit(hist: &BurstHistogram) -> Result<GeometricFit> {
    if hist.total_runs < MIN_RUNS {
        return Err(invalid(format!(
            "geometric fit needs at least {MIN_RUNS} runs, got {}",
            hist.total_runs
        )));
    }
    let p = hist.total_runs as f64 / hist.covered_steps() as f64;
    let goodness = if hist.counts.len() > 1 {
        geometric_goodness(hist, p, true)
    } else {
        None
    };
    Ok(GeometricFit {
        p,
        goodness,
        unreliable: goodness.is_none(),
    })
}

fn r_squared(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy * sxy / (sxx * syy))
}

fn survival_points(hist: &BurstHistogram, k_min: u64, k_max: u64) -> Vec<(u64, f64)> {
    hist.survival()
        .into_iter()
        .filter(|&(k, s)| k >= k_min && k <= k_max && s > 0.0)
        .collect()
}

/// R^2 of `ln S(k)` against `ln k` over `k_min..=k_max`.
pub fn survival_r2_loglog(hist: &BurstHistogram, k_min: u64, k_max: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = survival_points(hist, k_min, k_max)
        .into_iter()
        .map(|(k, s)| ((k as f64).ln(), s.ln()))
        .collect();
    r_squared(&pts)
}

/// R^2 of `ln S(k)` against `k`; a geometric law is exactly linear here.
pub fn survival_r2_semilog(hist: &BurstHistogram, k_min: u64, k_max: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = survival_points(hist, k_min, k_max)
        .into_iter()
        .map(|(k, s)| (k as f64, s.ln()))
        .collect();
    r_squared(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Steps flagged within threshold with probability `p_in`, until `runs` runs closed.
    fn bernoulli_runs(seed: u64, p_in: f64, runs: u64) -> BurstHistogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = vec![5.0];
        let mut closed = 0;
        let mut inside = false;
        while closed < runs {
            let flag = rng.random_bool(p_in);
            d.push(if flag { 0.0 } else { 5.0 });
            if inside && !flag {
                closed += 1;
            }
            inside = flag;
        }
        BurstHistogram::from_steps(&d, 0.0)
    }

    #[test]
    fn hand_checked_runs() {
        let h = burst_lengths(&[1.0, 1.0, 1.0, 2.0, 2.0, 1.0], 0.0).unwrap();
        assert_eq!(h.counts, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(h.total_runs, 2);
        assert_eq!(h.censored_runs, 1);
    }

    #[test]
    fn constant_series_single_run() {
        for d in [0.0, 1.0, 3.0] {
            let h = burst_lengths(&[42.0; 100], d).unwrap();
            assert_eq!(h.counts, BTreeMap::from([(99, 1)]));
        }
    }

    #[test]
    fn quantized_steps_respect_threshold() {
        // 68.3 - 67.3 is not exactly 1.0 in binary
        let h = burst_lengths(&[67.3, 68.3, 69.3, 75.0], 1.0).unwrap();
        assert_eq!(h.counts, BTreeMap::from([(2, 1)]));
    }

    #[test]
    fn geometric_recovery() {
        let h = bernoulli_runs(1, 0.5, 100_000);
        let f = geometric_fit(&h).unwrap();
        assert!((f.p - 0.5).abs() <= 0.003, "{}", f.p);
        assert!(f.goodness.unwrap().p_value > 0.01);
    }

    #[test]
    fn geometric_rejects_wrong_law() {
        let mut h = BurstHistogram::empty(0.0);
        // all runs length 2 or 4, far from geometric
        h.counts = BTreeMap::from([(2, 500), (4, 500)]);
        h.total_runs = 1000;
        let f = geometric_fit(&h).unwrap();
        assert!(f.goodness.unwrap().p_value < 1e-6);
    }

    #[test]
    fn all_unit_runs_flagged() {
        let mut h = BurstHistogram::empty(0.0);
        h.counts = BTreeMap::from([(1, 50)]);
        h.total_runs = 50;
        let f = geometric_fit(&h).unwrap();
        assert_eq!(f.p, 1.0);
        assert!(f.unreliable);
    }

    #[test]
    fn too_few_runs_error() {
        let h = burst_lengths(&[1.0, 1.0, 2.0], 0.0).unwrap();
        assert!(geometric_fit(&h).is_err());
    }

    #[test]
    fn survival_of_geometric_is_semilog_linear() {
        let h = bernoulli_runs(2, 0.8, 100_000);
        assert!(survival_r2_semilog(&h, 2, 30).unwrap() > 0.995);
        let s = h.survival();
        assert_eq!(s[0], (1, 1.0));
        assert!(s.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn merge_adds_counts() {
        let a = bernoulli_runs(3, 0.3, 1000);
        let b = bernoulli_runs(4, 0.3, 2000);
        let mut m = a.clone();
        m.merge(&b).unwrap();
        assert_eq!(m.total_runs, a.total_runs + b.total_runs);
        assert_eq!(m.covered_steps(), a.covered_steps() + b.covered_steps());
        assert!(m.merge(&BurstHistogram::empty(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn run_mass_equals_flagged_steps(
            series in prop::collection::vec(0i32..8, 2..300),
            d in 0u8..4,
        ) {
            let s: Vec<f64> = series.iter().map(|&v| v as f64).collect();
            let h = burst_lengths(&s, d as f64).unwrap();
            let flagged = s.windows(2).filter(|w| (w[1] - w[0]).abs() <= d as f64).count() as u64;
            prop_assert_eq!(h.covered_steps(), flagged);
            prop_assert!(h.covered_steps() <= s.len() as u64);
            prop_assert!(h.counts.keys().all(|&k| k >= 1));
        }
    }
}
