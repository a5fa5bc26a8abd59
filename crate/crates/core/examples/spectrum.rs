//! Per-frequency summaries, spectral regions and the pooled level distribution
//! of a synthetic trace.

use plc_noise::grid::{FrequencyGrid, QuantizationPolicy, Region, DEFAULT_REGION_BOUNDARIES_HZ};
use plc_noise::spectral::{segment_regions, SpectralAccumulator};
use plc_noise::synthesis::{synthesize, NoiseModel};

pub fn run_example() -> plc_noise::Result<(Vec<Region>, f64)> {
    let grid = FrequencyGrid::default();
    let model = NoiseModel::reference_default(&grid, 11)?;
    let mut acc = SpectralAccumulator::new(QuantizationPolicy::default(), grid.count());
    // every 16th frequency keeps the example quick
    for f in (0..grid.count()).step_by(16) {
        acc.accumulate_series(f, &synthesize(&model, 2000, f)?)?;
    }
    let summary = acc.frequency_summary();
    let regions = segment_regions(&grid, &summary, &DEFAULT_REGION_BOUNDARIES_HZ)?;
    let median = acc.global_distribution()?.quantile(0.5);
    Ok((regions, median))
}

fn main() -> plc_noise::Result<()> {
    let (regions, median) = run_example()?;
    for r in &regions {
        println!(
            "{} {:>8.0}-{:<8.0} Hz  median {:?}  q90-q10 {:?}",
            r.id, r.low_hz, r.high_hz, r.median_level, r.spread_q90_q10
        );
    }
    println!("global median {median} dBuV");
    Ok(())
}
