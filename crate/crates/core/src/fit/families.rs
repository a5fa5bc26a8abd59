use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::simplex::{minimize, SimplexOptions};
use super::{fit_t_weighted, robust_start, WeightedSample};
use crate::error::{Error, Result};

/// Candidate distribution families for the step series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    Laplace,
    Logistic,
    Cauchy,
    TLocationScale,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Gaussian,
        Family::Laplace,
        Family::Logistic,
        Family::Cauchy,
        Family::TLocationScale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Logistic => "logistic",
            Family::Cauchy => "cauchy",
            Family::TLocationScale => "t-location-scale",
        }
    }

    pub fn parameter_count(self) -> usize {
        match self {
            Family::TLocationScale => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown distribution family `{s}`")))
    }
}

/// One fitted family. `mu` and `sigma` are location and scale; `nu` is set
/// for the t family only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCandidate {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    pub nu: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
}

impl FitCandidate {
    /// Fitted density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (mu, s) = (self.mu, self.sigma);
        match self.family {
            Family::Gaussian => {
                let z = (x - mu) / s;
                (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            Family::Laplace => (-(x - mu).abs() / s).exp() / (2.0 * s),
            Family::Logistic => logistic_lnpdf(x, mu, s).exp(),
            Family::Cauchy => cauchy_lnpdf(x, mu, s).exp(),
            Family::TLocationScale => super::TLocationScale {
                mu,
                sigma: s,
                nu: self.nu.unwrap_or(f64::INFINITY),
            }
            .pdf(x),
        }
    }
}

/// Runner-up within this relative log-likelihood distance of the winner
/// marks the selection as a near tie.
pub const NEAR_TIE_RELATIVE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub candidates: Vec<FitCandidate>,
    pub failures: Vec<(Family, String)>,
    pub winner: Family,
    pub near_tie: bool,
}

impl ModelSelection {
    pub fn candidate(&self, family: Family) -> Option<&FitCandidate> {
        self.candidates.iter().find(|c| c.family == family)
    }

    pub fn winning(&self) -> &FitCandidate {
        self.candidate(self.winner).expect("winner is a candidate")
    }
}

fn candidate(family: Family, mu: f64, sigma: f64, nu: Option<f64>, loglik: f64, n: usize) -> FitCandidate {
    FitCandidate {
        family,
        mu,
        sigma,
        nu,
        loglik,
        aic: 2.0 * family.parameter_count() as f64 - 2.0 * loglik,
        n,
    }
}

fn logistic_lnpdf(x: f64, mu: f64, s: f64) -> f64 {
    let z = ((x - mu) / s).abs();
    -z - s.ln() - 2.0 * (-z).exp().ln_1p()
}

fn cauchy_lnpdf(x: f64, mu: f64, g: f64) -> f64 {
    let z = (x - mu) / g;
    -(std::f64::consts::PI * g).ln() - (z * z).ln_1p()
}

fn simplex_location_scale<F>(data: &WeightedSample, family: Family, mu0: f64, s0: f64, lnpdf: F) -> Result<FitCandidate>
where
    F: Fn(f64, f64, f64) -> f64 + Sync + Copy,
{
    let n = data.len() as f64;
    let objective = |t: &[f64]| {
        let (mu, s) = (t[0], t[1].exp());
        -data.weighted_sum(move |x| lnpdf(x, mu, s)) / n
    };
    let mut x = vec![mu0, s0.ln()];
    let mut converged = false;
    for _ in 0..3 {
        let r = minimize(objective, &x, &[0.1 * s0, 0.1], SimplexOptions::default());
        let same = r.x.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs().max(1.0));
        x = r.x;
        converged = r.converged;
        if converged && same {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: SimplexOptions::default().max_iterations,
            best_value: -objective(&x) * n,
            best_point: vec![x[0], x[1].exp()],
        });
    }
    let (mu, s) = (x[0], x[1].exp());
    Ok(candidate(family, mu, s, None, data.weighted_sum(|v| lnpdf(v, mu, s)), data.len()))
}

/// Maximum-likelihood fit of one family.
pub fn fit_family(data: &WeightedSample, family: Family) -> Result<FitCandidate> {
    let n = data.len();
    let nf = n as f64;
    let (med, robust_scale) = robust_start(data)?;
    match family {
        Family::Gaussian => {
            let mean = data.mean();
            let var = data.weighted_sum(|x| (x - mean) * (x - mean)) / nf;
            let ll = -0.5 * nf * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
            Ok(candidate(family, mean, var.sqrt(), None, ll, n))
        }
        Family::Laplace => {
            let b = data.weighted_sum(|x| (x - med).abs()) / nf;
            let ll = -nf * ((2.0 * b).ln() + 1.0);
            Ok(candidate(family, med, b, None, ll, n))
        }
        Family::Logistic => {
            simplex_location_scale(data, family, med, robust_scale * 0.6, logistic_lnpdf)
        }
        Family::Cauchy => simplex_location_scale(data, family, med, robust_scale * 0.67, cauchy_lnpdf),
        Family::TLocationScale => {
            let f = fit_t_weighted(data)?;
            Ok(candidate(family, f.dist.mu, f.dist.sigma, Some(f.dist.nu), f.loglik, n))
        }
    }
}

/// Fits every family and selects the one with the largest log-likelihood.
/// Per-family failures are recorded; selection runs over the survivors.
pub fn best_fit(data: &WeightedSample, families: &[Family]) -> Result<ModelSelection> {
    if families.is_empty() {
        return Err(crate::error::invalid("no candidate families"));
    }
    if data.min() == data.max() {
        return Err(Error::Degenerate("sample has zero spread".into()));
    }
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for &family in families {
        match fit_family(data, family) {
            Ok(c) if c.loglik.is_finite() => candidates.push(c),
            Ok(c) => failures.push((family, format!("non-finite log-likelihood {}", c.loglik))),
            Err(e) => failures.push((family, e.to_string())),
        }
    }
    if candidates.is_empty() {
        let detail = failures
            .iter()
            .map(|(f, e)| format!("{f}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::AllFitsFailed(detail));
    }
    let mut order: Vec<&FitCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
    let winner = order[0].family;
    let near_tie = order
        .get(1)
        .is_some_and(|r| (order[0].loglik - r.loglik).abs() <= NEAR_TIE_RELATIVE * order[0].loglik.abs());
    Ok(ModelSelection {
        candidates,
        failures,
        winner,
        near_tie,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};

    #[test]
    fn selects_t_on_heavy_tailed_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chi = ChiSquared::new(2.87).unwrap();
        let d: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v: f64 = chi.sample(&mut rng);
                1.8e-3 + 3.47 * z / (v / 2.87).sqrt()
            })
            .collect();
        let sel = best_fit(&WeightedSample::new(&d).unwrap(), &Family::ALL).unwrap();
        assert_eq!(sel.winner, Family::TLocationScale);
        assert!(sel.failures.is_empty(), "{:?}", sel.failures);
        assert!(!sel.near_tie);
    }

    #[test]
    fn gaussian_data_is_near_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = Normal::new(3.0, 2.0).unwrap();
        let d: Vec<f64> = (0..100_000).map(|_| n.sample(&mut rng)).collect();
        let sel = best_fit(&WeightedSample::new(&d).unwrap(), &Family::ALL).unwrap();
        let g = sel.candidate(Family::Gaussian).unwrap().loglik;
        let t = sel.candidate(Family::TLocationScale).unwrap().loglik;
        assert!((g - t).abs() <= 1e-3 * g.abs());
        assert!(sel.near_tie);
        assert!(matches!(sel.winner, Family::Gaussian | Family::TLocationScale));
    }

    #[test]
    fn laplace_closed_form() {
        let data = WeightedSample::new(&[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let c = fit_family(&data, Family::Laplace).unwrap();
        assert_eq!(c.mu, 0.0);
        assert!((c.sigma - 1.2).abs() < 1e-15);
    }

    #[test]
    fn constant_data_errors() {
        let data = WeightedSample::new(&[4.2; 100]).unwrap();
        assert!(matches!(best_fit(&data, &Family::ALL), Err(Error::Degenerate(_))));
    }

    #[test]
    fn aic_counts_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sel = best_fit(&WeightedSample::new(&d).unwrap(), &Family::ALL).unwrap();
        for c in &sel.candidates {
            let k = c.family.parameter_count() as f64;
            assert!((c.aic - (2.0 * k - 2.0 * c.loglik)).abs() < 1e-9);
        }
    }

    #[test]
    fn candidate_densities_integrate_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sel = best_fit(&WeightedSample::new(&d).unwrap(), &Family::ALL).unwrap();
        for c in &sel.candidates {
            let h = 1e-3;
            let mass: f64 = (-20_000..20_000).map(|i| c.pdf(i as f64 * h) * h).sum();
            // the Cauchy loses about 3% of its mass beyond +-20
            let tol = if c.family == Family::Cauchy { 0.05 } else { 1e-4 };
            assert!((mass - 1.0).abs() < tol, "{}: {mass}", c.family);
            let ll: f64 = d.iter().map(|&x| c.pdf(x).ln()).sum();
            assert!((ll - c.loglik).abs() < 1e-6 * ll.abs(), "{}", c.family);
        }
    }

    #[test]
    fn family_names_roundtrip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
    }
}
