//! Step-series modelling: differencing, maximum-likelihood fitting of the
//! t location-scale law and competing families, and burst statistics.

pub mod bursts;
mod families;
pub mod simplex;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{beta_inc, digamma, ln_gamma};

pub use bursts::{
    burst_lengths, geometric_fit, geometric_goodness, survival_r2_loglog, survival_r2_semilog,
    BurstHistogram, GeometricFit, GoodnessOfFit,
};
pub use families::{best_fit, fit_family, Family, FitCandidate, ModelSelection, NEAR_TIE_RELATIVE};

/// `d(t) = n(t) - n(t-1)`.
pub fn difference(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(invalid("differencing needs at least 2 samples"));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Inverse of [`difference`]: `anchor` followed by its running sums.
pub fn cumulative_sum(d: &[f64], anchor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut x = anchor;
    out.push(x);
    for v in d {
        x += v;
        out.push(x);
    }
    out
}

/// Data compressed to distinct values with multiplicities. Quantized levels
/// and steps collapse to a few thousand support points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl WeightedSample {
    pub fn new(data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("empty sample"));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite sample {x}")));
        }
        let mut sorted = data.to_vec();
        sorted.par_sort_unstable_by(f64::total_cmp);
        let mut values = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for x in sorted {
            match values.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() += 1.0,
                _ => {
                    values.push(x);
                    weights.push(1.0);
                }
            }
        }
        Ok(Self {
            values,
            weights,
            total: data.len() as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.total as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0.0
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Lower weighted quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = (p * self.total).max(1.0);
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += w;
            if acc >= target - 1e-9 {
                return *v;
            }
        }
        self.max()
    }

    pub fn mean(&self) -> f64 {
        self.weighted_sum(|x| x) / self.total
    }

    /// Median absolute deviation about the median.
    pub fn mad(&self) -> f64 {
        let m = self.quantile(0.5);
        let mut dev: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| ((v - m).abs(), *w))
            .collect();
        dev.sort_by(|a, b| a.0.total_cmp(&b.0));
        let target = (0.5 * self.total).max(1.0);
        let mut acc = 0.0;
        for (d, w) in dev {
            acc += w;
            if acc >= target - 1e-9 {
                return d;
            }
        }
        0.0
    }

    /// `sum_i w_i f(x_i)`, evaluated in fixed-size chunks in parallel and
    /// reduced in chunk order so the result does not depend on thread count.
    pub fn weighted_sum<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        const CHUNK: usize = 16_384;
        let partials: Vec<f64> = self
            .values
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(v, w)| v.iter().zip(w).map(|(x, w)| w * f(*x)).sum::<f64>())
            .collect();
        partials.iter().sum()
    }

    fn weighted_sum3<F>(&self, f: F) -> [f64; 3]
    where
        F: Fn(f64) -> [f64; 3] + Sync,
    {
        const CHUNK: usize = 16_384;
        let partials: Vec<[f64; 3]> = self
            .values
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(v, w)| {
                v.iter().zip(w).fold([0.0; 3], |mut acc, (x, w)| {
                    let g = f(*x);
                    for k in 0..3 {
                        acc[k] += w * g[k];
                    }
                    acc
                })
            })
            .collect();
        partials.iter().fold([0.0; 3], |mut acc, g| {
            for k in 0..3 {
                acc[k] += g[k];
            }
            acc
        })
    }
}

/// Student t location-scale distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TLocationScale {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl TLocationScale {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) || !(nu > 0.0) || nu.is_nan() {
            return Err(invalid(format!(
                "invalid t location-scale parameters mu={mu}, sigma={sigma}, nu={nu}"
            )));
        }
        Ok(Self { mu, sigma, nu })
    }

    fn log_norm(&self) -> f64 {
        ln_gamma(0.5 * (self.nu + 1.0)) - ln_gamma(0.5 * self.nu) - 0.5 * (self.nu * PI).ln() - self.sigma.ln()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        self.log_norm() - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        let tail = 0.5 * beta_inc(0.5 * self.nu, 0.5, self.nu / (self.nu + z * z));
        if z > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Inverse CDF by bracketing and bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantile probability {p} outside (0, 1)")));
        }
        let (mut lo, mut hi) = (self.mu - self.sigma, self.mu + self.sigma);
        while self.cdf(lo) > p {
            lo = self.mu - 2.0 * (self.mu - lo);
        }
        while self.cdf(hi) < p {
            hi = self.mu + 2.0 * (hi - self.mu);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn loglik(&self, data: &WeightedSample) -> f64 {
        let c = self.log_norm();
        let (mu, sigma, nu) = (self.mu, self.sigma, self.nu);
        let h = 0.5 * (nu + 1.0);
        data.weighted_sum(move |x| {
            let z = (x - mu) / sigma;
            c - h * (z * z / nu).ln_1p()
        })
    }

    /// Analytic gradient of the log-likelihood with respect to `(mu, sigma, nu)`.
    pub fn gradient(&self, data: &WeightedSample) -> [f64; 3] {
        let (mu, sigma, nu) = (self.mu, self.sigma, self.nu);
        let dnu_const = 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu;
        data.weighted_sum3(move |x| {
            let z = (x - mu) / sigma;
            let z2 = z * z;
            let r = (nu + 1.0) / (nu + z2);
            [
                r * z / sigma,
                (r * z2 - 1.0) / sigma,
                dnu_const - 0.5 * (z2 / nu).ln_1p() + 0.5 * r * z2 / nu,
            ]
        })
    }
}

/// Result of a t location-scale maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TFit {
    pub dist: TLocationScale,
    pub loglik: f64,
    pub n: usize,
    pub evaluations: usize,
}

/// Upper cap on the fitted degrees of freedom; beyond it the law is Gaussian
/// to double precision.
pub const NU_MAX: f64 = 1e8;
const MIN_FIT_SAMPLES: usize = 100;

pub(crate) fn robust_start(data: &WeightedSample) -> Result<(f64, f64)> {
    if data.min() == data.max() {
        return Err(Error::Degenerate("sample has zero spread".into()));
    }
    let med = data.quantile(0.5);
    let mut scale = 1.4826 * data.mad();
    if !(scale > 0.0) {
        // more than half the mass on one value
        let m = data.mean();
        scale = (data.weighted_sum(|x| (x - m) * (x - m)) / data.total).sqrt();
    }
    Ok((med, scale))
}

/// Fits `(mu, sigma, nu)` by maximum likelihood with a restarted simplex
/// search over `(mu, ln sigma, ln nu)`.
pub fn fit_t_location_scale(data: &[f64]) -> Result<TFit> {
    fit_t_weighted(&WeightedSample::new(data)?)
}

pub fn fit_t_weighted(data: &WeightedSample) -> Result<TFit> {
    if data.len() < MIN_FIT_SAMPLES {
        return Err(invalid(format!(
            "t location-scale fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            data.len()
        )));
    }
    let (mu0, s0) = robust_start(data)?;
    let n = data.total;
    let ln_nu_max = NU_MAX.ln();
    let objective = |t: &[f64]| -> f64 {
        let excess = (t[2] - ln_nu_max).max(0.0);
        let dist = TLocationScale {
            mu: t[0],
            sigma: t[1].exp(),
            nu: t[2].min(ln_nu_max).exp(),
        };
        -dist.loglik(data) / n + excess * excess
    };
    let opts = simplex::SimplexOptions::default();
    let mut start = vec![mu0, s0.ln(), 4f64.ln()];
    let mut evaluations = 0;
    let mut best: Option<simplex::SimplexOutcome> = None;
    for _ in 0..4 {
        let r = simplex::minimize(objective, &start, &[0.1 * s0, 0.1, 0.5], opts);
        evaluations += r.evaluations;
        let improved = best
            .as_ref()
            .map_or(f64::INFINITY, |b| b.value - r.value);
        let done = r.converged && improved.abs() <= 1e-12 * r.value.abs().max(1.0);
        if best.as_ref().is_none_or(|b| r.value <= b.value) {
            start = r.x.clone();
            best = Some(r);
        }
        if done {
            break;
        }
    }
    let best = best.unwrap();
    let dist = TLocationScale {
        mu: best.x[0],
        sigma: best.x[1].exp(),
        nu: best.x[2].min(ln_nu_max).exp(),
    };
    if !best.converged {
        // a simplex that stalled on a flat ridge is still accepted at a stationary point
        let g = dist.gradient(data);
        let scaled = [g[0] * dist.sigma / n, g[1] * dist.sigma / n, g[2] * dist.nu / n];
        if scaled.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6 {
            return Err(Error::NoConvergence {
                iterations: opts.max_iterations,
                best_value: -best.value * n,
                best_point: vec![dist.mu, dist.sigma, dist.nu],
            });
        }
    }
    Ok(TFit {
        dist,
        loglik: dist.loglik(data),
        n: data.len(),
        evaluations,
    })
}

/// Empirical step masses at the quantization resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeMass {
    pub p_zero: f64,
    pub p_within_1: f64,
    pub p_within_3: f64,
    pub n: usize,
}

pub fn derivative_mass_report(d: &[f64]) -> Result<DerivativeMass> {
    if d.is_empty() {
        return Err(invalid("empty step series"));
    }
    let n = d.len() as f64;
    let frac = |lim: f64| d.iter().filter(|x| x.abs() <= lim + 1e-9).count() as f64 / n;
    Ok(DerivativeMass {
        p_zero: frac(0.0),
        p_within_1: frac(1.0),
        p_within_3: frac(3.0),
        n: d.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    fn t_draws(seed: u64, n: usize, mu: f64, sigma: f64, nu: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chi = ChiSquared::new(nu).unwrap();
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v: f64 = chi.sample(&mut rng);
                mu + sigma * z / (v / nu).sqrt()
            })
            .collect()
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[5.0, 5.0, 6.0, 4.0]).unwrap(), vec![0.0, 1.0, -2.0]);
        assert!(difference(&[7.0; 10]).unwrap().iter().all(|&v| v == 0.0));
        assert!(difference(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn difference_cumsum_roundtrip(levels in prop::collection::vec(-200i32..1200, 2..200)) {
            // levels in tenths of a dB, so every value is exactly representable after scaling
            let series: Vec<f64> = levels.iter().map(|&v| v as f64).collect();
            let d = difference(&series).unwrap();
            prop_assert_eq!(cumulative_sum(&d, series[0]), series);
            let back = difference(&cumulative_sum(&d, 3.0)).unwrap();
            prop_assert_eq!(back, d);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for &(sigma, nu) in &[(1.0, 3.0), (3.47, 2.87), (0.5, 1.0), (2.0, 50.0)] {
            let t = TLocationScale::new(0.3, sigma, nu).unwrap();
            // composite Simpson over +-50 sigma
            let (a, b) = (0.3 - 50.0 * sigma, 0.3 + 50.0 * sigma);
            let m = 200_000;
            let h = (b - a) / m as f64;
            let mut s = t.pdf(a) + t.pdf(b);
            for i in 1..m {
                s += t.pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let integral = s * h / 3.0;
            // mass beyond +-50 sigma, from the CDF
            let tails = 2.0 * t.cdf(a);
            assert!((integral + tails - 1.0).abs() < 1e-6, "nu {nu}: {integral}");
            if nu >= 2.0 {
                assert!((integral - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn cdf_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let ours = TLocationScale::new(1.8e-3, 3.47, 2.87).unwrap();
        let theirs = StudentsT::new(1.8e-3, 3.47, 2.87).unwrap();
        for x in [-40.0, -3.5, -0.1, 0.0, 1.0, 3.5, 12.0] {
            assert!((ours.cdf(x) - theirs.cdf(x)).abs() < 1e-10, "{x}");
        }
        let q = ours.quantile(0.9).unwrap();
        assert!((ours.cdf(q) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = WeightedSample::new(&t_draws(11, 2000, 0.5, 2.0, 4.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = [rng.random_range(-1.0..2.0), rng.random_range(0.5..5.0), rng.random_range(0.8..30.0)];
            let g = TLocationScale::new(p[0], p[1], p[2]).unwrap().gradient(&data);
            for k in 0..3 {
                let h = 1e-5 * p[k].abs().max(1e-2);
                let mut up = p;
                let mut dn = p;
                up[k] += h;
                dn[k] -= h;
                let lu = TLocationScale::new(up[0], up[1], up[2]).unwrap().loglik(&data);
                let ld = TLocationScale::new(dn[0], dn[1], dn[2]).unwrap().loglik(&data);
                let fd = (lu - ld) / (2.0 * h);
                assert!(
                    (g[k] - fd).abs() <= 1e-5 * g[k].abs().max(fd.abs()),
                    "param {k} at {p:?}: {} vs {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn recovers_t_parameters() {
        let fit = fit_t_location_scale(&t_draws(2024, 100_000, 0.0, 1.0, 3.0)).unwrap();
        let d = fit.dist;
        assert!(d.mu.abs() <= 0.02, "{d:?}");
        assert!((d.sigma - 1.0).abs() <= 0.03, "{d:?}");
        assert!((2.8..=3.2).contains(&d.nu), "{d:?}");
    }

    #[test]
    fn gaussian_data_drives_nu_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = fit_t_location_scale(&data).unwrap();
        assert!(fit.dist.nu >= 50.0, "{:?}", fit.dist);
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let gauss_ll = -0.5 * n * ((2.0 * PI * var).ln() + 1.0);
        assert!((fit.loglik - gauss_ll).abs() <= 1e-3 * gauss_ll.abs());
    }

    #[test]
    fn fit_is_local_optimum() {
        let data = WeightedSample::new(&t_draws(8, 20_000, 1.0, 2.0, 3.5)).unwrap();
        let fit = fit_t_weighted(&data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let f = |v: f64, r: &mut ChaCha8Rng| v * (1.0 + r.random_range(-0.1..0.1));
            let mu = fit.dist.mu + fit.dist.sigma * rng.random_range(-0.1..0.1);
            let alt = TLocationScale::new(mu, f(fit.dist.sigma, &mut rng), f(fit.dist.nu, &mut rng)).unwrap();
            assert!(alt.loglik(&data) <= fit.loglik + 1e-9 * fit.loglik.abs());
        }
    }

    #[test]
    fn weighted_equals_unweighted_loglik() {
        let raw: Vec<f64> = t_draws(3, 5000, 0.0, 1.0, 3.0).iter().map(|x| (x * 10.0).round() / 10.0).collect();
        let ws = WeightedSample::new(&raw).unwrap();
        assert!(ws.distinct() < raw.len());
        let t = TLocationScale::new(0.1, 1.2, 4.0).unwrap();
        let direct: f64 = raw.iter().map(|&x| t.ln_pdf(x)).sum();
        assert!((t.loglik(&ws) - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn zero_spread_and_small_samples_rejected() {
        assert!(matches!(fit_t_location_scale(&[2.0; 100]), Err(Error::Degenerate(_))));
        assert!(fit_t_location_scale(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn derivative_masses() {
        let m = derivative_mass_report(&[0.0; 10]).unwrap();
        assert_eq!((m.p_zero, m.p_within_1, m.p_within_3), (1.0, 1.0, 1.0));
        assert!(derivative_mass_report(&[]).is_err());
    }

    #[test]
    fn integer_steps_mass_matches_density() {
        let t = TLocationScale::new(1.8e-3, 3.47, 2.87).unwrap();
        let d: Vec<f64> = t_draws(21, 1_000_000, t.mu, t.sigma, t.nu).iter().map(|x| x.round()).collect();
        let m = derivative_mass_report(&d).unwrap();
        let expect = t.cdf(3.5) - t.cdf(-3.5);
        assert!((m.p_within_3 - expect).abs() < 3e-3, "{} vs {expect}", m.p_within_3);
    }
}
