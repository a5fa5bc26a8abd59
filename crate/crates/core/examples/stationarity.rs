//! KPSS and ADF on a stationary and a unit-root series, and the chunked
//! stationarity curve.

use plc_noise::stationarity::{adf, kpss_level, stationarity_curve, Alpha, Bandwidth, StationarityCurve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> plc_noise::Result<(bool, bool, StationarityCurve)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let walk: Vec<f64> = noise
        .iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc)
        })
        .collect();

    let kpss_noise = kpss_level(&noise, Bandwidth::Auto, Alpha::P05)?;
    let kpss_walk = kpss_level(&walk, Bandwidth::Auto, Alpha::P05)?;
    let adf_walk = adf(&walk, 1, Alpha::P05)?;
    println!("KPSS noise  stat {:.3} cv {:.3} -> {:?}", kpss_noise.statistic, kpss_noise.critical_value, kpss_noise.decision);
    println!("KPSS walk   stat {:.3} cv {:.3} -> {:?}", kpss_walk.statistic, kpss_walk.critical_value, kpss_walk.decision);
    println!("ADF walk    stat {:.3} cv {:.3} -> {:?}", adf_walk.statistic, adf_walk.critical_value, adf_walk.decision);

    let curve = stationarity_curve(&walk, &[30, 60, 120, 300], Alpha::P05)?;
    Ok((kpss_noise.rejected(), kpss_walk.rejected(), curve))
}

fn main() -> plc_noise::Result<()> {
    let (_, _, curve) = run_example()?;
    for p in &curve.points {
        println!("walk chunk {:>4}: stationary fraction {:.3} over {} chunks", p.chunk_len, p.fraction, p.chunks);
    }
    Ok(())
}
