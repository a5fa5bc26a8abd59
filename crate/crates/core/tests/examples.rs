//! Runs every example's `run_example` so the examples stay working.

#[allow(dead_code)]
#[path = "../examples/ingest_trace.rs"]
mod ingest_trace;
#[allow(dead_code)]
#[path = "../examples/spectrum.rs"]
mod spectrum;
#[allow(dead_code)]
#[path = "../examples/stationarity.rs"]
mod stationarity;
#[allow(dead_code)]
#[path = "../examples/dependence.rs"]
mod dependence;
#[allow(dead_code)]
#[path = "../examples/fit_steps.rs"]
mod fit_steps;
#[allow(dead_code)]
#[path = "../examples/bursts.rs"]
mod bursts;
#[allow(dead_code)]
#[path = "../examples/synthesis.rs"]
mod synthesis;

use plc_noise::fit::Family;
use plc_noise::pipeline::{RunStatus, StageStatus};
use plc_noise::synthesis::CheckStatus;

#[test]
fn ingest_example_sees_the_missing_tick() {
    let r = ingest_trace::run_example().unwrap();
    assert_eq!(r.samples, 199);
    assert_eq!(r.frequencies_covered, 2);
    assert_eq!(r.mode_gap_s, 1.0);
    assert!(r.gap_histogram.iter().any(|b| b.value_s == 2.0 && b.count == 1));
}

#[test]
fn spectrum_example_has_four_regions() {
    let (regions, median) = spectrum::run_example().unwrap();
    assert_eq!(regions.len(), 4);
    assert!(regions.iter().all(|r| r.median_level.is_some()));
    assert!(median > 0.0 && median < 100.0);
}

#[test]
fn stationarity_example_separates_noise_from_walk() {
    let (noise_rejected, walk_rejected, curve) = stationarity::run_example().unwrap();
    assert!(!noise_rejected);
    assert!(walk_rejected);
    assert_eq!(curve.points.len(), 4);
}

#[test]
fn dependence_example_detects_ar1() {
    let (r, lb) = dependence::run_example().unwrap();
    assert!((r.values[1] - 0.6).abs() < 0.03);
    assert!(lb.rejected());
}

#[test]
fn fit_example_selects_t() {
    assert_eq!(fit_steps::run_example().unwrap().winner, Family::TLocationScale);
}

#[test]
fn bursts_example_fits_every_threshold() {
    let out = bursts::run_example().unwrap();
    assert_eq!(out.len(), 3);
    // wider thresholds keep levels steady for longer
    assert!(out.windows(2).all(|w| w[1].2.p < w[0].2.p));
}

#[test]
fn synthesis_example_reports_every_check() {
    let r = synthesis::run_example().unwrap();
    assert_eq!(r.checks.len(), 7);
    assert_eq!(r.check("levels-within-band").unwrap().status, CheckStatus::Pass);
    assert_eq!(r.check("ljung-box-levels-dependent").unwrap().status, CheckStatus::Pass);
}

#[test]
fn pipeline_example_runs_clean() {
    let o = pipeline::run_example().unwrap();
    assert_eq!(o.status, RunStatus::Ok);
    assert!(o.manifest.stages.iter().all(|s| s.status == StageStatus::Ok));
    std::fs::remove_dir_all(o.output_dir.parent().unwrap()).unwrap();
}
