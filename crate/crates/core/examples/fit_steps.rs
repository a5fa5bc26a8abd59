//! Maximum-likelihood fit of heavy-tailed steps and model selection across the
//! candidate families.

use plc_noise::fit::{best_fit, Family, ModelSelection, WeightedSample};
use plc_noise::synthesis::{TSampler, REFERENCE_STEP};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> plc_noise::Result<ModelSelection> {
    let (mu, sigma, nu) = REFERENCE_STEP;
    let sampler = TSampler::new(mu, sigma, nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let steps: Vec<f64> = (0..50_000).map(|_| sampler.sample(&mut rng)).collect();
    best_fit(&WeightedSample::new(&steps)?, &Family::ALL)
}

fn main() -> plc_noise::Result<()> {
    let sel = run_example()?;
    for c in &sel.candidates {
        println!(
            "{:<17} mu {:+.4} sigma {:.4} nu {:>8} loglik {:.1} aic {:.1}",
            c.family.as_str(),
            c.mu,
            c.sigma,
            c.nu.map_or("-".into(), |v| format!("{v:.3}")),
            c.loglik,
            c.aic
        );
    }
    println!("winner: {} (near tie: {})", sel.winner.as_str(), sel.near_tie);
    Ok(())
}
