use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sliding-window mean, standard deviation and sample variance (step 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingStats {
    pub window: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub variance: Vec<f64>,
}

impl MovingStats {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Windows between full recomputations of the shifted sums.
const RECOMPUTE_EVERY: usize = 1 << 20;

#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Computes windowed statistics with shifted, compensated running sums that
/// are rebuilt from scratch every 2^20 steps.
pub fn moving_stats(series: &[f64], window: usize) -> Result<MovingStats> {
    if window < 2 {
        return Err(invalid("moving window must be at least 2"));
    }
    if window > series.len() {
        return Err(invalid(format!(
            "window {window} longer than series of {}",
            series.len()
        )));
    }
    let positions = series.len() - window + 1;
    let mut out = MovingStats {
        window,
        mean: Vec::with_capacity(positions),
        std: Vec::with_capacity(positions),
        variance: Vec::with_capacity(positions),
    };
    let w = window as f64;

    let mut shift = 0.0;
    let mut s1 = Compensated::default();
    let mut s2 = Compensated::default();
    let rebuild = |start: usize, shift: &mut f64, s1: &mut Compensated, s2: &mut Compensated| {
        let win = &series[start..start + window];
        *shift = win[0];
        *s1 = Compensated::default();
        *s2 = Compensated::default();
        for &x in win {
            let d = x - *shift;
            s1.add(d);
            s2.add(d * d);
        }
    };

    for start in 0..positions {
        if start % RECOMPUTE_EVERY == 0 {
            rebuild(start, &mut shift, &mut s1, &mut s2);
        } else {
            let out_x = series[start - 1] - shift;
            let in_x = series[start + window - 1] - shift;
            s1.add(-out_x);
            s2.add(-out_x * out_x);
            s1.add(in_x);
            s2.add(in_x * in_x);
        }
        let a = s1.value();
        let var = ((s2.value() - a * a / w) / (w - 1.0)).max(0.0);
        out.mean.push(shift + a / w);
        out.variance.push(var);
        out.std.push(var.sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_series_has_zero_std() {
        let m = moving_stats(&[37.3; 500], 60).unwrap();
        assert_eq!(m.len(), 441);
        assert!(m.std.iter().all(|&s| s == 0.0));
        assert!(m.mean.iter().all(|&x| (x - 37.3).abs() < 1e-12));
    }

    #[test]
    fn ramp_mean_is_window_midpoint() {
        let series: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let m = moving_stats(&series, 11).unwrap();
        for (start, &mean) in m.mean.iter().enumerate() {
            assert!((mean - (start as f64 + 5.0)).abs() < 1e-9);
        }
        // variance of 11 consecutive integers is 11 (n-1 divisor)
        assert!(m.variance.iter().all(|&v| (v - 11.0).abs() < 1e-9));
    }

    #[test]
    fn matches_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = Normal::new(60.0, 7.0).unwrap();
        let series: Vec<f64> = (0..5000).map(|_| n.sample(&mut rng)).collect();
        let m = moving_stats(&series, 100).unwrap();
        for start in (0..m.len()).step_by(97) {
            let win = &series[start..start + 100];
            let mean = win.iter().sum::<f64>() / 100.0;
            let var = win.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0;
            assert!((m.mean[start] - mean).abs() < 1e-9);
            assert!((m.variance[start] - var).abs() < 1e-8 * var);
        }
    }

    #[test]
    fn white_noise_std_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = Normal::new(0.0, 5.0).unwrap();
        let series: Vec<f64> = (0..100_000).map(|_| n.sample(&mut rng)).collect();
        let m = moving_stats(&series, 3600).unwrap();
        let inside = m.std.iter().filter(|&&s| (4.5..=5.5).contains(&s)).count();
        assert!(inside as f64 >= 0.99 * m.len() as f64);
    }

    #[test]
    fn window_errors() {
        assert!(moving_stats(&[1.0; 10], 1).is_err());
        assert!(moving_stats(&[1.0; 10], 11).is_err());
    }
}
