//! Full run: synthesize a trace, analyse it with every stage and list the
//! report bundle.

use plc_noise::config::RunConfig;
use plc_noise::grid::FrequencyGrid;
use plc_noise::ingest::TraceFormat;
use plc_noise::pipeline::{run_pipeline, write_synthetic_trace, RunOutcome};
use plc_noise::synthesis::NoiseModel;

pub fn run_example() -> plc_noise::Result<RunOutcome> {
    let dir = std::env::temp_dir().join(format!("plc-noise-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let grid = FrequencyGrid::default();
    let model = NoiseModel::reference_default(&grid, 1)?;
    let trace = dir.join("trace.plnz");
    let freqs: Vec<usize> = (0..grid.count()).step_by(40).collect();
    write_synthetic_trace(&model, &freqs, 4000, 1.0, &trace, TraceFormat::PackedBinary)?;

    let mut cfg = RunConfig {
        inputs: vec![trace],
        output_dir: dir.join("report"),
        ..Default::default()
    };
    cfg.apply_override("acf.long_lag=600")?;
    run_pipeline(&cfg)
}

fn main() -> plc_noise::Result<()> {
    let outcome = run_example()?;
    println!("status {:?}, report in {}", outcome.status, outcome.output_dir.display());
    for s in &outcome.manifest.stages {
        println!("{:<13} {:?} {:>8.1} ms  {}", s.stage, s.status, s.elapsed_ms, s.outputs.join(" "));
    }
    Ok(())
}
