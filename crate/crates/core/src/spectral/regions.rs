use crate::error::{invalid, Result};
use crate::grid::{FrequencyGrid, Region, RegionId};

use super::FrequencySummary;

/// Splits the grid at `boundaries_hz` and summarizes each region by the lower
/// median of its per-frequency medians and the mean `q90 - q10` spread.
pub fn segment_regions(
    grid: &FrequencyGrid,
    summary: &[Option<FrequencySummary>],
    boundaries_hz: &[f64],
) -> Result<Vec<Region>> {
    if summary.len() != grid.count() {
        return Err(invalid(format!(
            "summary has {} frequencies, grid has {}",
            summary.len(),
            grid.count()
        )));
    }
    let (lo, hi) = (grid.start_hz(), grid.end_hz());
    if boundaries_hz.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("region boundaries must be strictly increasing"));
    }
    if let Some(b) = boundaries_hz.iter().find(|&&b| !(b > lo && b < hi)) {
        return Err(invalid(format!(
            "region boundary {b} Hz outside grid span ({lo}, {hi})"
        )));
    }
    if boundaries_hz.len() >= u8::MAX as usize {
        return Err(invalid("too many regions"));
    }

    let mut edges = Vec::with_capacity(boundaries_hz.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(boundaries_hz);
    edges.push(hi);

    let mut regions = Vec::with_capacity(edges.len() - 1);
    for (r, w) in edges.windows(2).enumerate() {
        let last = r == edges.len() - 2;
        let members: Vec<usize> = (0..grid.count())
            .filter(|&i| {
                let f = grid.frequency(i);
                f >= w[0] && (f < w[1] || (last && f <= w[1]))
            })
            .collect();
        let mut medians: Vec<f64> = members
            .iter()
            .filter_map(|&i| summary[i].map(|s| s.q50))
            .collect();
        let spreads: Vec<f64> = members
            .iter()
            .filter_map(|&i| summary[i].map(|s| s.q90 - s.q10))
            .collect();
        medians.sort_by(f64::total_cmp);
        let median_level = (!medians.is_empty()).then(|| medians[(medians.len() - 1) / 2]);
        let spread_q90_q10 =
            (!spreads.is_empty()).then(|| spreads.iter().sum::<f64>() / spreads.len() as f64);
        regions.push(Region {
            id: RegionId(r as u8 + 1),
            low_hz: w[0],
            high_hz: w[1],
            frequencies: members.len(),
            median_level,
            spread_q90_q10,
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{QuantizationPolicy, DEFAULT_REGION_BOUNDARIES_HZ};
    use crate::spectral::SpectralAccumulator;

    fn plateau_summary(grid: &FrequencyGrid, levels: &[(f64, f64)]) -> Vec<Option<FrequencySummary>> {
        let mut acc = SpectralAccumulator::new(QuantizationPolicy::default(), grid.count());
        for i in 0..grid.count() {
            let f = grid.frequency(i);
            let level = levels.iter().find(|(edge, _)| f < *edge).map(|(_, l)| *l).unwrap();
            acc.accumulate_series(i, &[level - 1.0, level, level + 1.0]).unwrap();
        }
        acc.frequency_summary()
    }

    #[test]
    fn default_boundaries_give_four_covering_regions() {
        let grid = FrequencyGrid::default();
        let summary = plateau_summary(&grid, &[(f64::INFINITY, 50.0)]);
        let regions = segment_regions(&grid, &summary, &DEFAULT_REGION_BOUNDARIES_HZ).unwrap();
        assert_eq!(regions.len(), 4);
        assert_eq!(regions.iter().map(|r| r.frequencies).sum::<usize>(), 776);
        assert_eq!(regions[0].id.to_string(), "R1");
        for w in regions.windows(2) {
            assert_eq!(w[0].high_hz, w[1].low_hz);
        }
    }

    #[test]
    fn plateau_medians_are_exact() {
        let grid = FrequencyGrid::default();
        let summary = plateau_summary(
            &grid,
            &[(95_000.0, 68.0), (200_000.0, 40.0), (300_000.0, 30.0), (f64::INFINITY, 23.0)],
        );
        let regions = segment_regions(&grid, &summary, &DEFAULT_REGION_BOUNDARIES_HZ).unwrap();
        let medians: Vec<f64> = regions.iter().map(|r| r.median_level.unwrap()).collect();
        assert_eq!(medians, vec![68.0, 40.0, 30.0, 23.0]);
        for r in &regions {
            assert!((r.spread_q90_q10.unwrap() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn midpoint_boundary_splits_in_two() {
        let grid = FrequencyGrid::default();
        let summary = plateau_summary(&grid, &[(f64::INFINITY, 50.0)]);
        let mid = 0.5 * (grid.start_hz() + grid.end_hz());
        let regions = segment_regions(&grid, &summary, &[mid]).unwrap();
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].frequencies, 388);
        assert_eq!(regions[1].frequencies, 388);
    }

    #[test]
    fn boundary_outside_grid_rejected() {
        let grid = FrequencyGrid::default();
        let summary = plateau_summary(&grid, &[(f64::INFINITY, 50.0)]);
        assert!(segment_regions(&grid, &summary, &[10_000.0]).is_err());
        assert!(segment_regions(&grid, &summary, &[500_000.0]).is_err());
    }
}
