//! Autocorrelation with the Bartlett bound and the Ljung-Box test on an AR(1)
//! series.

use plc_noise::dependence::{acf, ljung_box, AcfResult};
use plc_noise::stationarity::TestOutcome;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> plc_noise::Result<(AcfResult, TestOutcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut x = 0.0;
    let series: Vec<f64> = (0..20_000)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = 0.6 * x + e;
            x
        })
        .collect();
    Ok((acf(&series, 10)?, ljung_box(&series, 10, 0.05)?))
}

fn main() -> plc_noise::Result<()> {
    let (r, lb) = run_example()?;
    println!("bound +-{:.4}", r.bartlett_bound);
    for (k, v) in r.lags.iter().zip(&r.values).skip(1) {
        println!("lag {k:>2}: {v:+.4}  (0.6^k = {:+.4})", 0.6f64.powi(*k as i32));
    }
    println!("Ljung-Box Q {:.1} vs {:.2}: {:?}", lb.statistic, lb.critical_value, lb.decision);
    Ok(())
}
