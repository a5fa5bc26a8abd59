use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::NoiseSample;

/// How missing nominal ticks are handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GapPolicy {
    /// Repeat the previous value across missing ticks.
    HoldLast,
    /// Leave missing ticks out of the output.
    Skip,
    /// Fail when any gap exceeds `k` nominal periods.
    ErrorAbove(f64),
}

impl fmt::Display for GapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapPolicy::HoldLast => f.write_str("hold-last"),
            GapPolicy::Skip => f.write_str("skip"),
            GapPolicy::ErrorAbove(k) => write!(f, "error-above:{k}"),
        }
    }
}

impl FromStr for GapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hold-last" => Ok(GapPolicy::HoldLast),
            "skip" => Ok(GapPolicy::Skip),
            _ => match s.strip_prefix("error-above:") {
                Some(k) => k
                    .parse::<f64>()
                    .ok()
                    .filter(|k| *k > 0.0)
                    .map(GapPolicy::ErrorAbove)
                    .ok_or_else(|| Error::Config(format!("bad gap limit in `{s}`"))),
                None => Err(Error::Config(format!("unknown gap policy `{s}`"))),
            },
        }
    }
}

/// A series sampled on nominal ticks `start + k * period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularSeries {
    pub start_s: f64,
    pub period_s: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularizationAudit {
    /// Ticks synthesized by hold-last.
    pub ticks_filled: u64,
    /// Samples discarded because another sample already occupied their tick.
    pub ticks_dropped: u64,
    /// Missing ticks left out under the skip policy.
    pub ticks_skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Regularized {
    pub series: BTreeMap<u16, RegularSeries>,
    pub audit: RegularizationAudit,
}

#[derive(Default)]
struct Lane {
    start: f64,
    last_tick: i64,
    last_time: f64,
    values: Vec<f64>,
    started: bool,
}

/// Maps each sample to its nearest nominal tick (relative to the first sample
/// of its frequency) and emits one value per tick.
pub fn regularize<I>(stream: I, nominal_period: f64, policy: GapPolicy) -> Result<Regularized>
where
    I: IntoIterator<Item = Result<NoiseSample>>,
{
    if !(nominal_period > 0.0) {
        return Err(invalid("nominal period must be positive"));
    }
    let mut lanes: BTreeMap<u16, Lane> = BTreeMap::new();
    let mut audit = RegularizationAudit::default();
    for s in stream {
        let s = s?;
        let lane = lanes.entry(s.freq_index).or_default();
        if !lane.started {
            lane.started = true;
            lane.start = s.timestamp;
            lane.last_time = s.timestamp;
            lane.last_tick = 0;
            lane.values.push(s.level);
            continue;
        }
        let gap = s.timestamp - lane.last_time;
        if gap < 0.0 {
            return Err(invalid(format!(
                "timestamps decrease for frequency {}",
                s.freq_index
            )));
        }
        if let GapPolicy::ErrorAbove(k) = policy {
            if gap > k * nominal_period {
                return Err(Error::GapTooLarge {
                    freq_index: s.freq_index,
                    gap,
                    limit: k * nominal_period,
                });
            }
        }
        lane.last_time = s.timestamp;
        let tick = ((s.timestamp - lane.start) / nominal_period).round() as i64;
        if tick <= lane.last_tick {
            // collapse onto the occupied tick, keeping the latest value
            *lane.values.last_mut().unwrap() = s.level;
            audit.ticks_dropped += 1;
            continue;
        }
        let missing = (tick - lane.last_tick - 1) as u64;
        match policy {
            GapPolicy::Skip => audit.ticks_skipped += missing,
            GapPolicy::HoldLast | GapPolicy::ErrorAbove(_) => {
                let prev = *lane.values.last().unwrap();
                lane.values.extend(std::iter::repeat_n(prev, missing as usize));
                audit.ticks_filled += missing;
            }
        }
        lane.values.push(s.level);
        lane.last_tick = tick;
    }
    let series = lanes
        .into_iter()
        .map(|(f, lane)| {
            (
                f,
                RegularSeries {
                    start_s: lane.start,
                    period_s: nominal_period,
                    values: lane.values,
                },
            )
        })
        .collect();
    Ok(Regularized { series, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(ts: &[f64]) -> Vec<Result<NoiseSample>> {
        ts.iter()
            .enumerate()
            .map(|(i, &t)| Ok(NoiseSample::new(t, 3, i as f64)))
            .collect()
    }

    #[test]
    fn regular_series_unchanged() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = regularize(samples(&ts), 1.0, GapPolicy::HoldLast).unwrap();
        let s = &r.series[&3];
        assert_eq!(s.values, (0..20).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(r.audit, RegularizationAudit::default());
    }

    #[test]
    fn one_missing_tick_is_held() {
        let r = regularize(samples(&[0.0, 1.0, 3.0]), 1.0, GapPolicy::HoldLast).unwrap();
        assert_eq!(r.series[&3].values, vec![0.0, 1.0, 1.0, 2.0]);
        assert_eq!(r.audit.ticks_filled, 1);
    }

    #[test]
    fn skip_leaves_gap_out() {
        let r = regularize(samples(&[0.0, 1.0, 3.0]), 1.0, GapPolicy::Skip).unwrap();
        assert_eq!(r.series[&3].values, vec![0.0, 1.0, 2.0]);
        assert_eq!(r.audit.ticks_skipped, 1);
    }

    #[test]
    fn error_above_triggers() {
        let err = regularize(samples(&[0.0, 1.0, 4.5]), 1.0, GapPolicy::ErrorAbove(3.0));
        assert!(matches!(err, Err(Error::GapTooLarge { .. })));
        assert!(regularize(samples(&[0.0, 1.0, 3.5]), 1.0, GapPolicy::ErrorAbove(3.0)).is_ok());
    }

    #[test]
    fn jitter_below_half_period_never_fills() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ts: Vec<f64> = (0..10_000)
            .map(|i| i as f64 + 0.05 + rng.random_range(-0.05..0.05))
            .collect();
        let r = regularize(samples(&ts), 1.0, GapPolicy::HoldLast).unwrap();
        assert_eq!(r.series[&3].values.len(), ts.len());
        assert_eq!(r.audit.ticks_filled, 0);
        assert_eq!(r.audit.ticks_dropped, 0);
    }

    #[test]
    fn hold_last_length_matches_span() {
        let ts = [0.0, 1.0, 2.0, 7.0, 8.0, 12.0];
        let r = regularize(samples(&ts), 1.0, GapPolicy::HoldLast).unwrap();
        let span = ts[ts.len() - 1] - ts[0];
        assert_eq!(r.series[&3].values.len(), (span / 1.0).ceil() as usize + 1);
    }

    #[test]
    fn gap_policy_parses() {
        assert_eq!("hold-last".parse::<GapPolicy>().unwrap(), GapPolicy::HoldLast);
        assert_eq!("error-above:3".parse::<GapPolicy>().unwrap(), GapPolicy::ErrorAbove(3.0));
        assert!("error-above:x".parse::<GapPolicy>().is_err());
        assert_eq!(GapPolicy::ErrorAbove(2.5).to_string(), "error-above:2.5");
    }
}
