//! Sample autocorrelation with Bartlett significance bounds and the
//! Ljung-Box portmanteau test.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{chi2_quantile, normal_quantile};
use crate::stationarity::{Decision, TestId, TestOutcome};

/// Largest lag computed by direct summation; longer lags go through the FFT.
pub const DIRECT_MAX_LAG: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    /// Lags `0..=max_lag`.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub bartlett_bound: f64,
    pub n: usize,
}

impl AcfResult {
    pub fn rho(&self, lag: usize) -> Option<f64> {
        self.values.get(lag).copied()
    }

    /// Lags whose |rho| exceeds the bound (lag 0 excluded).
    pub fn significant_lags(&self) -> Vec<usize> {
        self.lags
            .iter()
            .zip(&self.values)
            .filter(|(&k, v)| k > 0 && v.abs() > self.bartlett_bound)
            .map(|(&k, _)| k)
            .collect()
    }
}

fn centred(series: &[f64], max_lag: usize) -> Result<(Vec<f64>, f64)> {
    if series.len() <= max_lag {
        return Err(invalid(format!(
            "ACF to lag {max_lag} needs more than {max_lag} samples, got {}",
            series.len()
        )));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let e: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = e.iter().map(|x| x * x).sum();
    let scale = series.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(denom > series.len() as f64 * (1e-13 * scale).powi(2)) {
        return Err(Error::Degenerate("ACF undefined for a zero-variance series".into()));
    }
    Ok((e, denom))
}

/// Biased ACF by direct summation, O(T * L).
pub fn acf_direct(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (e, denom) = centred(series, max_lag)?;
    Ok((0..=max_lag)
        .map(|k| e[k..].iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}

/// Biased ACF through the power spectrum of the zero-padded series.
pub fn acf_fft(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (e, _) = centred(series, max_lag)?;
    let size = (2 * e.len()).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = e.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    Ok(buf[..=max_lag].iter().map(|c| c.re / c0).collect())
}

/// Two-sided Bartlett bound `z_{1-alpha/2} / sqrt(n)`.
pub fn bartlett_bound(n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("Bartlett bound needs n >= 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(normal_quantile(1.0 - alpha / 2.0)? / (n as f64).sqrt())
}

/// Sample ACF for lags `0..=max_lag` with the Bartlett bound at alpha 0.05.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    acf_with_alpha(series, max_lag, 0.05)
}

pub fn acf_with_alpha(series: &[f64], max_lag: usize, alpha: f64) -> Result<AcfResult> {
    let values = if max_lag <= DIRECT_MAX_LAG {
        acf_direct(series, max_lag)?
    } else {
        acf_fft(series, max_lag)?
    };
    Ok(AcfResult {
        lags: (0..=max_lag).collect(),
        values,
        bartlett_bound: bartlett_bound(series.len(), alpha)?,
        n: series.len(),
    })
}

/// Ljung-Box statistic from precomputed autocorrelations `rho[1..=lags]`.
pub fn ljung_box_statistic(rho: &[f64], n: usize, lags: usize) -> f64 {
    let t = n as f64;
    t * (t + 2.0)
        * (1..=lags)
            .map(|k| rho[k] * rho[k] / (t - k as f64))
            .sum::<f64>()
}

/// Ljung-Box test of joint independence over lags `1..=lags`. Rejects when
/// `Q > chi2_{1-alpha, lags}`.
pub fn ljung_box(series: &[f64], lags: usize, alpha: f64) -> Result<TestOutcome> {
    if lags == 0 || series.len() <= lags {
        return Err(invalid(format!(
            "Ljung-Box needs 1 <= L < T, got L = {lags}, T = {}",
            series.len()
        )));
    }
    let rho = acf_with_alpha(series, lags, alpha)?.values;
    ljung_box_from_acf(&rho, series.len(), lags, alpha)
}

pub fn ljung_box_from_acf(rho: &[f64], n: usize, lags: usize, alpha: f64) -> Result<TestOutcome> {
    if rho.len() <= lags {
        return Err(invalid("autocorrelations do not reach the requested lag"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let statistic = ljung_box_statistic(rho, n, lags);
    let critical_value = chi2_quantile(1.0 - alpha, lags as f64)?;
    Ok(TestOutcome {
        test_id: TestId::LjungBox,
        statistic,
        critical_value,
        alpha,
        decision: if statistic > critical_value {
            Decision::Reject
        } else {
            Decision::FailToReject
        },
        lags,
        degenerate: false,
    })
}
