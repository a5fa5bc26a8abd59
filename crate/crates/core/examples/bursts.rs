//! Steady-state run lengths of a synthetic level series and their geometric
//! fit at several thresholds.

use plc_noise::fit::{burst_lengths, geometric_fit, survival_r2_semilog, GeometricFit};
use plc_noise::grid::FrequencyGrid;
use plc_noise::synthesis::{synthesize, NoiseModel};

pub fn run_example() -> plc_noise::Result<Vec<(f64, u64, GeometricFit)>> {
    let grid = FrequencyGrid::default();
    let model = NoiseModel::reference_default(&grid, 5)?;
    let levels = synthesize(&model, 100_000, 400)?;
    let mut out = Vec::new();
    for threshold in [1.0, 2.0, 3.0] {
        let hist = burst_lengths(&levels, threshold)?;
        let fit = geometric_fit(&hist)?;
        println!(
            "D={threshold}: {} runs, longest {}, semi-log R2 {:?}",
            hist.total_runs,
            hist.max_length(),
            survival_r2_semilog(&hist, 2, 100)
        );
        out.push((threshold, hist.total_runs, fit));
    }
    Ok(out)
}

fn main() -> plc_noise::Result<()> {
    for (d, _, fit) in run_example()? {
        let gof = fit.goodness.map_or("n/a".to_string(), |g| format!("chi2 {:.1} df {} p {:.3}", g.chi2, g.df, g.p_value));
        println!("D={d}: geometric p {:.4}, {gof}", fit.p);
    }
    Ok(())
}
