//! Generates levels from the default step model and checks them against the
//! model with the round-trip consistency report.

use plc_noise::grid::FrequencyGrid;
use plc_noise::stationarity::Alpha;
use plc_noise::synthesis::{synthesize, validate_roundtrip, ConsistencyReport, NoiseModel};

pub fn run_example() -> plc_noise::Result<ConsistencyReport> {
    let grid = FrequencyGrid::default();
    let model = NoiseModel::reference_default(&grid, 42)?;
    let freq = 300;
    let levels = synthesize(&model, 200_000, freq)?;
    println!("first levels at {:.0} Hz: {:?}", grid.frequency(freq), &levels[..8]);
    Ok(validate_roundtrip(&levels, &model, freq, Alpha::P05))
}

fn main() -> plc_noise::Result<()> {
    let report = run_example()?;
    for c in &report.checks {
        let value = c.value.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<34} {:?}  value {value}  expected {}", c.name, c.status, c.expected);
    }
    Ok(())
}
