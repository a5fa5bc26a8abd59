//! Writes a short trace in both formats, reads it back and prints the
//! sampling-gap report.

use plc_noise::grid::NoiseSample;
use plc_noise::ingest::{open_trace, sampling_gap_report, write_trace, GapReport, TraceFormat};

pub fn run_example() -> plc_noise::Result<GapReport> {
    let dir = std::env::temp_dir().join(format!("plc-noise-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    // two frequencies, one missing tick on the second
    let mut samples = Vec::new();
    for t in 0..100u32 {
        samples.push(NoiseSample::new(t as f64, 3, 60.0 + (t % 7) as f64 * 0.1));
        if t != 50 {
            samples.push(NoiseSample::new(t as f64 + 0.002, 9, 41.5));
        }
    }

    let packed = dir.join("trace.plnz");
    let csv = dir.join("trace.csv");
    write_trace(&packed, TraceFormat::PackedBinary, &samples)?;
    write_trace(&csv, TraceFormat::Csv, &samples)?;

    let from_packed: Vec<NoiseSample> = open_trace(&packed, TraceFormat::PackedBinary)?.collect::<Result<_, _>>()?;
    let from_csv: Vec<NoiseSample> = open_trace(&csv, TraceFormat::Csv)?.collect::<Result<_, _>>()?;
    assert_eq!(from_packed, from_csv);

    let report = sampling_gap_report(open_trace(&packed, TraceFormat::PackedBinary)?, 1.0)?;
    std::fs::remove_dir_all(&dir)?;
    Ok(report)
}

fn main() -> plc_noise::Result<()> {
    let r = run_example()?;
    println!("pairs {} over {} frequencies", r.pairs, r.frequencies_covered);
    println!("mode gap {} s, q95 |gap - period| {} s", r.mode_gap_s, r.q95_abs_error_s);
    for b in &r.gap_histogram {
        println!("  gap {:>6} s  x{}", b.value_s, b.count);
    }
    Ok(())
}
