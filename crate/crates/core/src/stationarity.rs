//! Unit-root testing: KPSS level-stationarity, augmented Dickey-Fuller, and the
//! fraction of disjoint chunks that pass KPSS as a function of chunk length.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Significance levels with tabulated critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Alpha {
    #[serde(rename = "0.10")]
    P10,
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.025")]
    P025,
    #[serde(rename = "0.01")]
    P01,
}

impl Alpha {
    pub const ALL: [Alpha; 4] = [Alpha::P10, Alpha::P05, Alpha::P025, Alpha::P01];

    pub fn value(self) -> f64 {
        match self {
            Alpha::P10 => 0.10,
            Alpha::P05 => 0.05,
            Alpha::P025 => 0.025,
            Alpha::P01 => 0.01,
        }
    }

    pub fn from_value(a: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| (x.value() - a).abs() < 1e-12)
            .ok_or_else(|| invalid(format!("alpha {a} not in {{0.10, 0.05, 0.025, 0.01}}")))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad alpha `{s}`")))?;
        Self::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestId {
    KpssLevel,
    Adf,
    LjungBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Reject,
    FailToReject,
}

/// Result of a hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: TestId,
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub decision: Decision,
    /// Lag count / bandwidth used by the test.
    pub lags: usize,
    /// Set when the input had no variation and the decision is by convention.
    pub degenerate: bool,
}

impl TestOutcome {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }

    fn degenerate(test_id: TestId, critical_value: f64, alpha: f64, lags: usize) -> Self {
        Self {
            test_id,
            statistic: 0.0,
            critical_value,
            alpha,
            decision: Decision::FailToReject,
            lags,
            degenerate: true,
        }
    }
}

/// Newey-West truncation lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `floor(4 * (T / 100)^(1/4))`.
    #[default]
    Auto,
    Fixed(usize),
}

impl Bandwidth {
    pub fn lags(self, n: usize) -> usize {
        match self {
            Bandwidth::Auto => (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize,
            Bandwidth::Fixed(l) => l,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        s.parse()
            .map(Bandwidth::Fixed)
            .map_err(|_| Error::Config(format!("bad bandwidth `{s}`")))
    }
}

/// Upper-tail critical values of the level-stationarity KPSS statistic. These
/// are the asymptotic quantiles of the integrated squared Brownian bridge.
pub fn kpss_critical_value(alpha: Alpha) -> f64 {
    match alpha {
        Alpha::P10 => 0.347_30,
        Alpha::P05 => 0.461_36,
        Alpha::P025 => 0.580_63,
        Alpha::P01 => 0.743_46,
    }
}

fn is_constant(series: &[f64]) -> bool {
    series.iter().all(|&x| x == series[0])
}

/// Bartlett-weighted long-run variance of residuals.
fn long_run_variance(resid: &[f64], lags: usize) -> f64 {
    let n = resid.len() as f64;
    let mut lrv = resid.iter().map(|e| e * e).sum::<f64>() / n;
    for j in 1..=lags.min(resid.len() - 1) {
        let gamma: f64 = resid[j..].iter().zip(resid).map(|(a, b)| a * b).sum::<f64>() / n;
        lrv += 2.0 * (1.0 - j as f64 / (lags as f64 + 1.0)) * gamma;
    }
    lrv
}

/// KPSS statistic on the demeaned series; `None` when degenerate.
pub fn kpss_statistic(series: &[f64], lags: usize) -> Option<f64> {
    if is_constant(series) {
        return None;
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let resid: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let lrv = long_run_variance(&resid, lags);
    let scale = series.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(lrv > (1e-12 * scale).powi(2)) {
        return None;
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        partial += e;
        eta += partial * partial;
    }
    Some(eta / ((n * n) as f64 * lrv))
}

/// KPSS test of level stationarity. Rejects when the statistic exceeds the
/// critical value at `alpha`.
pub fn kpss_level(series: &[f64], bandwidth: Bandwidth, alpha: Alpha) -> Result<TestOutcome> {
    if series.len() < 10 {
        return Err(invalid(format!(
            "KPSS needs at least 10 observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(invalid("KPSS input contains non-finite values"));
    }
    let lags = bandwidth.lags(series.len());
    let critical_value = kpss_critical_value(alpha);
    Ok(match kpss_statistic(series, lags) {
        None => TestOutcome::degenerate(TestId::KpssLevel, critical_value, alpha.value(), lags),
        Some(statistic) => TestOutcome {
            test_id: TestId::KpssLevel,
            statistic,
            critical_value,
            alpha: alpha.value(),
            decision: if statistic > critical_value {
                Decision::Reject
            } else {
                Decision::FailToReject
            },
            lags,
            degenerate: false,
        },
    })
}

/// Response-surface coefficients `(c_inf, c1, c2, c3)` for the constant-only
/// Dickey-Fuller t statistic at 1%, 5% and 10%.
const ADF_SURFACE: [(f64, [f64; 4]); 3] = [
    (0.01, [-3.430_35, -6.5393, -16.786, -79.433]),
    (0.05, [-2.861_54, -2.8903, -4.234, -40.040]),
    (0.10, [-2.566_77, -1.5384, -2.809, 0.0]),
];

fn surface(c: &[f64; 4], n: f64) -> f64 {
    c[0] + c[1] / n + c[2] / (n * n) + c[3] / (n * n * n)
}

/// Finite-sample ADF critical value for `nobs` regression observations. The
/// 2.5% level interpolates the 1% and 5% surfaces linearly in the normal
/// quantile of alpha.
pub fn adf_critical_value(alpha: Alpha, nobs: usize) -> f64 {
    let n = nobs as f64;
    match alpha {
        Alpha::P01 => surface(&ADF_SURFACE[0].1, n),
        Alpha::P05 => surface(&ADF_SURFACE[1].1, n),
        Alpha::P10 => surface(&ADF_SURFACE[2].1, n),
        Alpha::P025 => {
            let z01 = -2.326_347_874_040_841;
            let z05 = -1.644_853_626_951_472_7;
            let z025 = -1.959_963_984_540_054;
            let w = (z025 - z01) / (z05 - z01);
            let lo = surface(&ADF_SURFACE[0].1, n);
            let hi = surface(&ADF_SURFACE[1].1, n);
            lo + w * (hi - lo)
        }
    }
}

/// Solves the normal equations `X'X b = X'y` by Gaussian elimination with
/// partial pivoting. Returns `(b, (X'X)^-1)` or `None` when singular.
fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; 2 * k + 1]; k];
    for (r, &yv) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][2 * k] += r[i] * yv;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[k + i] = 1.0;
    }
    let scale = (0..k).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
    }
    let beta = a.iter().map(|r| r[2 * k]).collect();
    let inv = a.iter().map(|r| r[k..2 * k].to_vec()).collect();
    Some((beta, inv))
}

/// Augmented Dickey-Fuller test with a constant and `lag_order` lagged
/// differences. Rejects the unit root when the t statistic falls below the
/// critical value.
pub fn adf(series: &[f64], lag_order: usize, alpha: Alpha) -> Result<TestOutcome> {
    if series.len() < lag_order + 10 {
        return Err(invalid(format!(
            "ADF with {lag_order} lags needs at least {} observations, got {}",
            lag_order + 10,
            series.len()
        )));
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let nobs = dy.len() - lag_order;
    let critical_value = adf_critical_value(alpha, nobs);
    let degenerate = || TestOutcome::degenerate(TestId::Adf, critical_value, alpha.value(), lag_order);
    if is_constant(series) {
        return Ok(degenerate());
    }
    let mut rows = Vec::with_capacity(nobs);
    let mut y = Vec::with_capacity(nobs);
    for t in lag_order..dy.len() {
        let mut r = Vec::with_capacity(lag_order + 2);
        r.push(1.0);
        r.push(series[t]);
        for i in 1..=lag_order {
            r.push(dy[t - i]);
        }
        rows.push(r);
        y.push(dy[t]);
    }
    let k = lag_order + 2;
    let Some((beta, inv)) = ols(&rows, &y) else {
        return Ok(degenerate());
    };
    let rss: f64 = rows
        .iter()
        .zip(&y)
        .map(|(r, yv)| {
            let fit: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yv - fit).powi(2)
        })
        .sum();
    let s2 = rss / (nobs - k) as f64;
    let se = (s2 * inv[1][1]).sqrt();
    if !(se > 0.0) || !se.is_finite() {
        return Ok(degenerate());
    }
    let statistic = beta[1] / se;
    Ok(TestOutcome {
        test_id: TestId::Adf,
        statistic,
        critical_value,
        alpha: alpha.value(),
        decision: if statistic < critical_value {
            Decision::Reject
        } else {
            Decision::FailToReject
        },
        lags: lag_order,
        degenerate: false,
    })
}

/// Outcome of KPSS over disjoint chunks of one length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkedStationarity {
    pub chunk_len: usize,
    pub chunks: usize,
    /// Chunks where KPSS failed to reject stationarity (degenerate included).
    pub stationary: usize,
    pub degenerate: usize,
    pub fraction: f64,
}

/// Runs KPSS on consecutive disjoint chunks and returns the fraction that
/// fail to reject stationarity. Degenerate chunks count as stationary and are
/// tallied separately.
pub fn chunked_stationarity(series: &[f64], chunk_len: usize, alpha: Alpha) -> Result<ChunkedStationarity> {
    if chunk_len < 10 {
        return Err(invalid(format!("chunk length {chunk_len} below 10")));
    }
    let chunks = series.len() / chunk_len;
    if chunks == 0 {
        return Err(invalid(format!(
            "series of {} samples has no complete chunk of {chunk_len}",
            series.len()
        )));
    }
    let outcomes: Vec<TestOutcome> = series[..chunks * chunk_len]
        .par_chunks_exact(chunk_len)
        .map(|c| kpss_level(c, Bandwidth::Auto, alpha))
        .collect::<Result<_>>()?;
    let stationary = outcomes.iter().filter(|o| !o.rejected()).count();
    let degenerate = outcomes.iter().filter(|o| o.degenerate).count();
    Ok(ChunkedStationarity {
        chunk_len,
        chunks,
        stationary,
        degenerate,
        fraction: stationary as f64 / chunks as f64,
    })
}

/// One point of a stationarity curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub chunk_len: usize,
    /// 1-based channel, `None` for a single unlabelled series.
    pub channel: Option<usize>,
    pub fraction: f64,
    pub degenerate_count: usize,
    pub chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityCurve {
    pub alpha: f64,
    pub chunk_lengths: Vec<usize>,
    pub points: Vec<CurvePoint>,
}

impl StationarityCurve {
    pub fn fraction(&self, chunk_len: usize, channel: Option<usize>) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.chunk_len == chunk_len && p.channel == channel)
            .map(|p| p.fraction)
    }
}

/// Default chunk lengths in samples.
pub const DEFAULT_CHUNK_LENGTHS: [usize; 5] = [30, 60, 120, 300, 600];

/// Stationarity fraction of one series over several chunk lengths.
pub fn stationarity_curve(series: &[f64], lengths: &[usize], alpha: Alpha) -> Result<StationarityCurve> {
    let points = lengths
        .iter()
        .map(|&len| {
            chunked_stationarity(series, len, alpha).map(|c| CurvePoint {
                chunk_len: len,
                channel: None,
                fraction: c.fraction,
                degenerate_count: c.degenerate,
                chunks: c.chunks,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StationarityCurve {
        alpha: alpha.value(),
        chunk_lengths: lengths.to_vec(),
        points,
    })
}

/// Per-channel curve: the fraction for a channel is the mean over its
/// sub-carrier series. Input pairs are `(channel, series)`.
pub fn channel_stationarity_curve(
    series: &[(usize, &[f64])],
    lengths: &[usize],
    alpha: Alpha,
) -> Result<StationarityCurve> {
    let mut channels: Vec<usize> = series.iter().map(|(c, _)| *c).collect();
    channels.sort_unstable();
    channels.dedup();
    let mut points = Vec::new();
    for &len in lengths {
        let first = points.len();
        for &ch in &channels {
            let mut fractions = Vec::new();
            let mut degenerate = 0;
            let mut chunks = 0;
            for (_, s) in series.iter().filter(|(c, _)| *c == ch) {
                let r = chunked_stationarity(s, len, alpha)?;
                fractions.push(r.fraction);
                degenerate += r.degenerate;
                chunks += r.chunks;
            }
            points.push(CurvePoint {
                chunk_len: len,
                channel: Some(ch),
                fraction: fractions.iter().sum::<f64>() / fractions.len() as f64,
                degenerate_count: degenerate,
                chunks,
            });
        }
        // all-channel point: mean of the channel fractions
        let per_channel = &points[first..];
        let all = CurvePoint {
            chunk_len: len,
            channel: None,
            fraction: per_channel.iter().map(|p| p.fraction).sum::<f64>() / per_channel.len().max(1) as f64,
            degenerate_count: per_channel.iter().map(|p| p.degenerate_count).sum(),
            chunks: per_channel.iter().map(|p| p.chunks).sum(),
        };
        points.push(all);
    }
    Ok(StationarityCurve {
        alpha: alpha.value(),
        chunk_lengths: lengths.to_vec(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x += Distribution::<f64>::sample(&StandardNormal, rng);
                x
            })
            .collect()
    }

    #[test]
    fn auto_bandwidth() {
        assert_eq!(Bandwidth::Auto.lags(1000), 7);
        assert_eq!(Bandwidth::Auto.lags(30), 2);
        assert_eq!(Bandwidth::Auto.lags(120), 4);
    }

    /// Direct transcription of the textbook formula, independent of the
    /// partial-sum loop used by the implementation.
    fn kpss_oracle(x: &[f64], l: usize) -> f64 {
        let t = x.len();
        let mean = x.iter().sum::<f64>() / t as f64;
        let e: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let mut num = 0.0;
        for k in 0..t {
            let s: f64 = e[..=k].iter().sum();
            num += s * s;
        }
        let mut s2 = 0.0;
        for j in 0..=l {
            let mut g = 0.0;
            for k in j..t {
                g += e[k] * e[k - j];
            }
            g /= t as f64;
            s2 += if j == 0 { g } else { 2.0 * (1.0 - j as f64 / (l + 1) as f64) * g };
        }
        num / (t as f64).powi(2) / s2
    }

    #[test]
    fn kpss_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(&mut rng, 200);
        let stat = kpss_statistic(&x, 5).unwrap();
        assert!((stat - kpss_oracle(&x, 5)).abs() < 1e-10 * stat);
    }

    #[test]
    fn kpss_constant_is_degenerate() {
        let o = kpss_level(&[3.3; 50], Bandwidth::Auto, Alpha::P05).unwrap();
        assert!(o.degenerate);
        assert_eq!(o.decision, Decision::FailToReject);
    }

    #[test]
    fn kpss_short_series_rejected() {
        assert!(kpss_level(&[1.0; 9], Bandwidth::Auto, Alpha::P05).is_err());
    }

    #[test]
    fn kpss_affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_walk(&mut rng, 300);
        let base = kpss_statistic(&x, 6).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + 1234.5).collect();
        let scaled: Vec<f64> = x.iter().map(|v| -3.7 * v).collect();
        assert!((kpss_statistic(&shifted, 6).unwrap() - base).abs() < 1e-8 * base);
        assert!((kpss_statistic(&scaled, 6).unwrap() - base).abs() < 1e-10 * base);
    }

    #[test]
    fn kpss_iid_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let reps = 10_000;
        let rejected = (0..reps)
            .filter(|_| {
                kpss_level(&gaussian(&mut rng, 1000), Bandwidth::Auto, Alpha::P05)
                    .unwrap()
                    .rejected()
            })
            .count();
        let rate = rejected as f64 / reps as f64;
        assert!((rate - 0.05).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn kpss_random_walk_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let reps = 2_000;
        let rejected = (0..reps)
            .filter(|_| {
                kpss_level(&random_walk(&mut rng, 1000), Bandwidth::Auto, Alpha::P05)
                    .unwrap()
                    .rejected()
            })
            .count();
        assert!(rejected as f64 / reps as f64 >= 0.99);
    }

    #[test]
    fn kpss_critical_values_match_brownian_bridge_functional() {
        // integral of a squared Brownian bridge, simulated on a 1000-step grid
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let steps = 1000;
        let paths = 40_000;
        let mut stats: Vec<f64> = (0..paths)
            .map(|_| {
                let w: Vec<f64> = {
                    let mut acc = 0.0;
                    (0..steps)
                        .map(|_| {
                            acc += Distribution::<f64>::sample(&StandardNormal, &mut rng) / (steps as f64).sqrt();
                            acc
                        })
                        .collect()
                };
                let end = w[steps - 1];
                w.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let b = v - (i + 1) as f64 / steps as f64 * end;
                        b * b
                    })
                    .sum::<f64>()
                    / steps as f64
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        for alpha in Alpha::ALL {
            let q = stats[((1.0 - alpha.value()) * paths as f64) as usize];
            let cv = kpss_critical_value(alpha);
            assert!((q - cv).abs() < 0.03 * cv, "alpha {alpha}: mc {q} vs {cv}");
        }
    }

    #[test]
    fn adf_short_series_error() {
        assert!(adf(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 2, Alpha::P05).is_err());
    }

    #[test]
    fn adf_constant_is_degenerate() {
        let o = adf(&[5.0; 40], 1, Alpha::P05).unwrap();
        assert!(o.degenerate);
    }

    #[test]
    fn adf_critical_values_ordered() {
        let n = 250;
        let cvs: Vec<f64> = [Alpha::P01, Alpha::P025, Alpha::P05, Alpha::P10]
            .iter()
            .map(|&a| adf_critical_value(a, n))
            .collect();
        assert!(cvs.windows(2).all(|w| w[0] < w[1]), "{cvs:?}");
        assert!((adf_critical_value(Alpha::P025, 1_000_000) + 3.12).abs() < 0.01);
    }

    #[test]
    fn adf_random_walk_mostly_not_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let reps = 4_000;
        let kept = (0..reps)
            .filter(|_| !adf(&random_walk(&mut rng, 500), 1, Alpha::P05).unwrap().rejected())
            .count();
        // nominal non-rejection rate is 1 - alpha
        let rate = kept as f64 / reps as f64;
        assert!((rate - 0.95).abs() < 0.015, "{rate}");
    }

    #[test]
    fn adf_ar1_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let reps = 2_000;
        let rejected = (0..reps)
            .filter(|_| {
                let mut x = 0.0;
                let s: Vec<f64> = (0..500)
                    .map(|_| {
                        x = 0.2 * x + Distribution::<f64>::sample(&StandardNormal, &mut rng);
                        x
                    })
                    .collect();
                adf(&s, 1, Alpha::P05).unwrap().rejected()
            })
            .count();
        assert!(rejected as f64 / reps as f64 >= 0.99);
    }

    #[test]
    fn adf_size_matches_response_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let reps = 20_000;
        let stats: Vec<f64> = (0..reps)
            .map(|_| adf(&random_walk(&mut rng, 251), 0, Alpha::P05).unwrap().statistic)
            .collect();
        for alpha in Alpha::ALL {
            let cv = adf_critical_value(alpha, 250);
            let rate = stats.iter().filter(|&&s| s < cv).count() as f64 / reps as f64;
            let se = (alpha.value() * (1.0 - alpha.value()) / reps as f64).sqrt();
            assert!((rate - alpha.value()).abs() < 4.0 * se, "alpha {alpha}: {rate}");
        }
    }

    #[test]
    fn chunked_iid_near_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(&mut rng, 120 * 5000);
        let r = chunked_stationarity(&x, 120, Alpha::P05).unwrap();
        assert_eq!(r.chunks, 5000);
        assert!((r.fraction - 0.95).abs() <= 0.02, "{}", r.fraction);
    }

    #[test]
    fn chunked_random_walk_mostly_nonstationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_walk(&mut rng, 600 * 400);
        for len in [300, 600] {
            let r = chunked_stationarity(&x, len, Alpha::P05).unwrap();
            assert!(r.fraction <= 0.05, "len {len}: {}", r.fraction);
        }
        // with the automatic bandwidth the test has roughly 87% power at 120
        let r = chunked_stationarity(&x, 120, Alpha::P05).unwrap();
        assert!(r.fraction <= 0.15, "len 120: {}", r.fraction);
    }

    #[test]
    fn chunked_requires_complete_chunk() {
        assert!(chunked_stationarity(&[0.0; 50], 60, Alpha::P05).is_err());
        assert!(chunked_stationarity(&[0.0; 50], 5, Alpha::P05).is_err());
    }

    #[test]
    fn repeated_chunks_replicate_single_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chunk = gaussian(&mut rng, 60);
        let single = kpss_level(&chunk, Bandwidth::Auto, Alpha::P05).unwrap();
        let repeated: Vec<f64> = chunk.iter().cycle().take(60 * 9).copied().collect();
        let r = chunked_stationarity(&repeated, 60, Alpha::P05).unwrap();
        let expected = if single.rejected() { 0.0 } else { 1.0 };
        assert_eq!(r.fraction, expected);
    }

    #[test]
    fn degenerate_chunks_tallied() {
        let mut x = vec![4.0; 300];
        x.extend((0..300).map(|i| (i as f64 * 0.7).sin()));
        let r = chunked_stationarity(&x, 30, Alpha::P05).unwrap();
        assert_eq!(r.degenerate, 10);
    }

    #[test]
    fn curve_iid_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = gaussian(&mut rng, 600 * 1000);
        let curve = stationarity_curve(&x, &[30, 120, 600], Alpha::P05).unwrap();
        for p in &curve.points {
            assert!((p.fraction - 0.95).abs() <= 0.03, "{p:?}");
        }
    }

    #[test]
    fn curve_with_slow_trend_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3600 * 40;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let trend = (2.0 * std::f64::consts::PI * i as f64 / 3600.0).sin();
                trend + Distribution::<f64>::sample(&StandardNormal, &mut rng)
            })
            .collect();
        let curve = stationarity_curve(&x, &DEFAULT_CHUNK_LENGTHS, Alpha::P05).unwrap();
        let f: Vec<f64> = curve.points.iter().map(|p| p.fraction).collect();
        assert!(f.windows(2).all(|w| w[1] <= w[0]), "{f:?}");
        assert!(f[0] > f[4]);
    }

    #[test]
    fn single_length_single_point() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        assert_eq!(stationarity_curve(&x, &[50], Alpha::P05).unwrap().points.len(), 1);
    }

    #[test]
    fn channel_curve_averages_subcarriers() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = gaussian(&mut rng, 3000);
        let b = random_walk(&mut rng, 3000);
        let input = [(1, &a[..]), (1, &b[..]), (2, &a[..])];
        let curve = channel_stationarity_curve(&input, &[60], Alpha::P05).unwrap();
        let fa = chunked_stationarity(&a, 60, Alpha::P05).unwrap().fraction;
        let fb = chunked_stationarity(&b, 60, Alpha::P05).unwrap().fraction;
        assert!((curve.fraction(60, Some(1)).unwrap() - 0.5 * (fa + fb)).abs() < 1e-12);
        assert_eq!(curve.fraction(60, Some(2)).unwrap(), fa);
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("0.05".parse::<Alpha>().unwrap(), Alpha::P05);
        assert!("0.2".parse::<Alpha>().is_err());
    }
}
