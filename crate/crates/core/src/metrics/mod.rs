//! Predictive accuracy metrics over gridded crime counts.
//!
//! A [`CountRaster`] pairs per-cell scores with an eligibility mask; all
//! metrics rank and sum over eligible cells only. The headline indices:
//!
//! * PAI: hit rate inside the flagged area divided by areal coverage.
//! * PAI*: the best PAI attainable at that coverage (ranking by the
//!   observed counts themselves), and PEI = PAI / PAI*.
//! * FAI: real-to-simulated crime ratio inside the flagged area,
//!   normalized by the citywide ratio.
//! * Hotspot precision/recall/F1 at absolute count thresholds.
//!
//! District-level agreement is scored with the rank statistics in
//! [`stats`].

pub mod stats;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodata::{DistrictId, Grid};

/// Per-cell scores plus an eligibility mask in row-major order.
///
/// Scores must be finite and non-negative. Ineligible cells are invisible
/// to every metric: they are never selected, and their counts join no
/// total.
#[derive(Debug, Clone)]
pub struct CountRaster {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    eligible: Vec<bool>,
}

impl CountRaster {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, eligible: Vec<bool>) -> Result<Self> {
        let n = n_rows
            .checked_mul(n_cols)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Metric("raster dimensions must be positive".into()))?;
        if values.len() != n || eligible.len() != n {
            return Err(Error::Metric(format!(
                "raster of {n_rows}x{n_cols} cells needs {n} values and flags, got {} and {}",
                values.len(),
                eligible.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Metric(format!("raster values must be finite and >= 0, got {bad}")));
        }
        Ok(Self { n_rows, n_cols, values, eligible })
    }

    /// Raster over a grid's cells with the grid's walkable mask.
    pub fn from_grid(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        let eligible = grid.walkable_mask();
        Self::new(grid.spec.n_rows, grid.spec.n_cols, values, eligible)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_eligible(&self, id: usize) -> bool {
        self.eligible[id]
    }

    pub fn eligible_ids(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.eligible[i]).collect()
    }

    pub fn n_eligible(&self) -> usize {
        self.eligible.iter().filter(|&&e| e).count()
    }

    /// Sum of values over eligible cells.
    pub fn total(&self) -> f64 {
        self.values.iter().zip(&self.eligible).filter(|(_, &e)| e).map(|(v, _)| v).sum()
    }

    fn same_shape(&self, other: &CountRaster) -> Result<()> {
        if self.n_rows != other.n_rows
            || self.n_cols != other.n_cols
            || self.eligible != other.eligible
        {
            return Err(Error::Metric("rasters differ in shape or eligibility mask".into()));
        }
        Ok(())
    }
}

/// The `k` highest-scored eligible cells, where `k` rounds half-up from
/// `coverage * n_eligible`. Ties break by score descending, then row,
/// then column. Errors when the coverage is so small that k = 0, when it
/// lies outside (0, 1], or when no cell is eligible.
pub fn top_coverage_cells(raster: &CountRaster, coverage: f64) -> Result<Vec<usize>> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::Metric(format!("coverage must be in (0, 1], got {coverage}")));
    }
    let mut ids = raster.eligible_ids();
    if ids.is_empty() {
        return Err(Error::Metric("no eligible cells to rank".into()));
    }
    let k = (coverage * ids.len() as f64 + 0.5).floor() as usize;
    if k == 0 {
        return Err(Error::Metric(format!(
            "coverage {coverage} selects zero of {} eligible cells",
            ids.len()
        )));
    }
    // Cell ids are row-major, so the id itself is the (row, col) tiebreak.
    ids.sort_by(|&a, &b| raster.values[b].total_cmp(&raster.values[a]).then(a.cmp(&b)));
    ids.truncate(k);
    Ok(ids)
}

/// Prediction accuracy index of `selected` against observed counts:
/// (crimes inside / total crimes) / (cells inside / eligible cells).
/// Errors when the observed total is zero.
pub fn pai(real: &CountRaster, selected: &[usize]) -> Result<f64> {
    let total = real.total();
    if total <= 0.0 {
        return Err(Error::Metric("observed raster has no crime; PAI undefined".into()));
    }
    let hits: f64 = selected.iter().map(|&id| real.values[id]).sum();
    let area_share = selected.len() as f64 / real.n_eligible() as f64;
    Ok(hits / total / area_share)
}

/// PAI of the forecast's top cells, the ceiling PAI* from ranking the
/// observed counts themselves, and their ratio PEI.
pub fn pai_star_and_pei(sim: &CountRaster, real: &CountRaster, coverage: f64) -> Result<(f64, f64, f64)> {
    sim.same_shape(real)?;
    let predicted = top_coverage_cells(sim, coverage)?;
    let ideal = top_coverage_cells(real, coverage)?;
    let value = pai(real, &predicted)?;
    let ceiling = pai(real, &ideal)?;
    if ceiling <= 0.0 {
        return Err(Error::Metric("PAI* is zero; PEI undefined".into()));
    }
    Ok((value, ceiling, value / ceiling))
}

/// Forecast accuracy index over `selected`: the real-to-simulated crime
/// ratio inside the flagged cells, normalized by the citywide ratio, i.e.
/// `(real_in / sim_in) / (real_total / sim_total)`. 1 means the forecast
/// reproduces the observed relative cluster size.
pub fn fai(sim: &CountRaster, real: &CountRaster, selected: &[usize]) -> Result<f64> {
    sim.same_shape(real)?;
    let (sim_total, real_total) = (sim.total(), real.total());
    if sim_total <= 0.0 || real_total <= 0.0 {
        return Err(Error::Metric("FAI undefined when either raster sums to zero".into()));
    }
    let sim_in: f64 = selected.iter().map(|&id| sim.values[id]).sum();
    let real_in: f64 = selected.iter().map(|&id| real.values[id]).sum();
    if sim_in <= 0.0 {
        return Err(Error::Metric("FAI undefined: no simulated crime in the selected cells".into()));
    }
    Ok((real_in / sim_in) / (real_total / sim_total))
}

/// Precision, recall, and F1 of `sim >= threshold` cells against
/// `real >= threshold` cells, over eligible cells. An empty predicted or
/// actual set gives that component 0, and F1 is 0 when both are 0.
pub fn hotspot_prf(sim: &CountRaster, real: &CountRaster, threshold: f64) -> Result<(f64, f64, f64)> {
    sim.same_shape(real)?;
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::Metric(format!("hotspot threshold must be positive, got {threshold}")));
    }
    let (mut tp, mut pred, mut actual) = (0u64, 0u64, 0u64);
    for id in 0..sim.values.len() {
        if !sim.eligible[id] {
            continue;
        }
        let p = sim.values[id] >= threshold;
        let a = real.values[id] >= threshold;
        pred += p as u64;
        actual += a as u64;
        tp += (p && a) as u64;
    }
    let precision = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
    let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok((precision, recall, f1))
}

/// Raster values summed per district, ordered by ascending district id.
/// Sums run over every cell assigned to a district, eligible or not;
/// cells without a district are dropped.
pub fn district_vector(grid: &Grid, raster: &CountRaster) -> Result<Vec<(DistrictId, f64)>> {
    if grid.cells.len() != raster.values.len() {
        return Err(Error::Metric("raster does not match the grid".into()));
    }
    let mut sums: BTreeMap<DistrictId, f64> = grid.districts.iter().map(|d| (d.id, 0.0)).collect();
    for (cell, &v) in grid.cells.iter().zip(&raster.values) {
        if let Some(d) = cell.district {
            *sums.entry(d).or_insert(0.0) += v;
        }
    }
    Ok(sums.into_iter().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageMetrics {
    pub coverage: f64,
    pub pai: f64,
    pub pai_star: f64,
    pub pei: f64,
    pub fai: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistrictTests {
    pub n_districts: usize,
    pub spearman_rho: f64,
    pub spearman_p: f64,
    pub t_stat: f64,
    pub t_df: usize,
    pub t_p: f64,
    pub wilcoxon_w: f64,
    pub wilcoxon_z: f64,
    pub wilcoxon_p: f64,
}

/// Full comparison of a simulated raster against an observed one.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub coverage: Vec<CoverageMetrics>,
    pub hotspots: Vec<ThresholdMetrics>,
    /// Present when the grid has at least 3 districts and the totals
    /// support the tests (non-constant, not identical).
    pub districts: Option<DistrictTests>,
}

impl MetricsReport {
    /// The row for coverage `c`, matched within 1e-9.
    pub fn coverage_entry(&self, c: f64) -> Option<&CoverageMetrics> {
        self.coverage.iter().find(|e| (e.coverage - c).abs() < 1e-9)
    }

    /// The row for threshold `t`, matched within 1e-9.
    pub fn threshold_entry(&self, t: f64) -> Option<&ThresholdMetrics> {
        self.hotspots.iter().find(|e| (e.threshold - t).abs() < 1e-9)
    }
}

/// Areal coverages scored by default: 3%, 5%, 10%, 20%.
pub const DEFAULT_COVERAGES: [f64; 4] = [0.03, 0.05, 0.10, 0.20];

/// Hotspot count thresholds scored by default.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [1.0, 10.0, 50.0, 100.0, 200.0];

/// Scores `sim` against `real` at each coverage and threshold, plus
/// district-level rank tests when the grid's districts admit them.
/// Differences feeding the t and Wilcoxon tests are simulated minus
/// observed.
pub fn evaluate(
    grid: &Grid,
    sim: &CountRaster,
    real: &CountRaster,
    coverages: &[f64],
    thresholds: &[f64],
) -> Result<MetricsReport> {
    let mut coverage = Vec::with_capacity(coverages.len());
    for &c in coverages {
        let (pai_v, pai_star, pei) = pai_star_and_pei(sim, real, c)?;
        let selected = top_coverage_cells(sim, c)?;
        let fai_v = fai(sim, real, &selected)?;
        coverage.push(CoverageMetrics { coverage: c, pai: pai_v, pai_star, pei, fai: fai_v });
    }
    let mut hotspots = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let (precision, recall, f1) = hotspot_prf(sim, real, t)?;
        hotspots.push(ThresholdMetrics { threshold: t, precision, recall, f1 });
    }

    let real_d: Vec<f64> = district_vector(grid, real)?.into_iter().map(|(_, v)| v).collect();
    let sim_d: Vec<f64> = district_vector(grid, sim)?.into_iter().map(|(_, v)| v).collect();
    let districts = match (
        stats::spearman(&real_d, &sim_d),
        stats::paired_t(&real_d, &sim_d),
        stats::wilcoxon_signed_rank(&real_d, &sim_d),
    ) {
        (Ok((rho, rho_p)), Ok((t, df, t_p)), Ok((w, z, w_p))) => Some(DistrictTests {
            n_districts: real_d.len(),
            spearman_rho: rho,
            spearman_p: rho_p,
            t_stat: t,
            t_df: df,
            t_p,
            wilcoxon_w: w,
            wilcoxon_z: z,
            wilcoxon_p: w_p,
        }),
        _ => None,
    };

    Ok(MetricsReport { coverage, hotspots, districts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{build_grid, CellAttr, DistrictInfo, GridSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn raster(rows: usize, cols: usize, values: Vec<f64>) -> CountRaster {
        let n = rows * cols;
        CountRaster::new(rows, cols, values, vec![true; n]).unwrap()
    }

    #[test]
    fn raster_validation() {
        assert!(CountRaster::new(0, 4, vec![], vec![]).is_err());
        assert!(CountRaster::new(2, 2, vec![1.0; 3], vec![true; 4]).is_err());
        assert!(CountRaster::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0], vec![true; 4]).is_err());
        assert!(CountRaster::new(2, 2, vec![1.0, 2.0, -0.5, 0.0], vec![true; 4]).is_err());
        let r = CountRaster::new(1, 3, vec![1.0, 2.0, 3.0], vec![true, false, true]).unwrap();
        assert_eq!(r.n_eligible(), 2);
        assert_eq!(r.total(), 4.0);
    }

    #[test]
    fn top_cells_round_half_up_and_tiebreak() {
        // Scores 9, 5, 5, 1 on a 2x2 grid; 50% of 4 = 2 cells.
        let r = raster(2, 2, vec![9.0, 5.0, 5.0, 1.0]);
        assert_eq!(top_coverage_cells(&r, 0.5).unwrap(), vec![0, 1]);

        // 3% of 100 = 3 cells.
        let mut v = vec![0.0; 100];
        v[7] = 3.0;
        v[42] = 9.0;
        v[55] = 5.0;
        let r = raster(10, 10, v);
        assert_eq!(top_coverage_cells(&r, 0.03).unwrap(), vec![42, 55, 7]);

        // Round half-up: 50% of 5 eligible = 2.5 -> 3 cells.
        let r = CountRaster::new(1, 6, vec![1.0; 6], vec![true, true, true, true, true, false])
            .unwrap();
        assert_eq!(top_coverage_cells(&r, 0.5).unwrap().len(), 3);

        // Full coverage selects every eligible cell.
        let r = raster(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(top_coverage_cells(&r, 1.0).unwrap().len(), 6);
    }

    #[test]
    fn top_cells_errors() {
        let r = raster(2, 2, vec![1.0; 4]);
        assert!(top_coverage_cells(&r, 0.0).is_err());
        assert!(top_coverage_cells(&r, 1.5).is_err());
        // 1% of 4 cells rounds to 0.
        assert!(top_coverage_cells(&r, 0.01).is_err());
        let none = CountRaster::new(1, 2, vec![1.0, 1.0], vec![false, false]).unwrap();
        assert!(top_coverage_cells(&none, 0.5).is_err());
    }

    #[test]
    fn top_cells_skip_ineligible() {
        // Highest score sits on an ineligible cell and must not be picked.
        let r = CountRaster::new(1, 4, vec![99.0, 3.0, 2.0, 1.0], vec![false, true, true, true])
            .unwrap();
        assert_eq!(top_coverage_cells(&r, 0.67).unwrap(), vec![1, 2]);
    }

    #[test]
    fn pai_examples() {
        // Counts 10, 5, 3, 2 and the single best cell: (10/20)/(1/4) = 2.
        let r = raster(2, 2, vec![10.0, 5.0, 3.0, 2.0]);
        assert_abs_diff_eq!(pai(&r, &[0]).unwrap(), 2.0, epsilon = 1e-12);
        // Every cell selected: exactly 1.
        assert_eq!(pai(&r, &[0, 1, 2, 3]).unwrap(), 1.0);
        // No crime in the selected cell: 0.
        let r2 = raster(2, 2, vec![10.0, 5.0, 3.0, 0.0]);
        assert_eq!(pai(&r2, &[3]).unwrap(), 0.0);
        // All-zero observed raster is an error.
        let z = raster(2, 2, vec![0.0; 4]);
        assert!(pai(&z, &[0]).is_err());
    }

    #[test]
    fn pei_perfect_and_bounded() {
        let r = raster(3, 3, vec![9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let (p, ps, pei) = pai_star_and_pei(&r, &r, 0.33).unwrap();
        assert_eq!(p, ps);
        assert_abs_diff_eq!(pei, 1.0, epsilon = 1e-12);

        let sim = raster(3, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let (_, _, pei) = pai_star_and_pei(&sim, &r, 0.33).unwrap();
        assert!(pei <= 1.0 + 1e-12);
    }

    #[test]
    fn fai_examples() {
        // Selected cell: 8 of 16 real crimes, 10 of 40 simulated ones.
        // (8/10)/(16/40) = 2.
        let sim = raster(1, 4, vec![10.0, 30.0, 0.0, 0.0]);
        let real = raster(1, 4, vec![8.0, 8.0, 0.0, 0.0]);
        let v = fai(&sim, &real, &[0]).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);

        // Proportional rasters give exactly 1 whatever the selection.
        let prop = raster(1, 4, vec![20.0, 60.0, 0.0, 0.0]);
        assert_eq!(fai(&sim, &prop, &[0]).unwrap(), 1.0);
        assert_eq!(fai(&sim, &prop, &[0, 1]).unwrap(), 1.0);

        let zero = raster(1, 4, vec![0.0; 4]);
        assert!(fai(&zero, &real, &[0]).is_err());
        assert!(fai(&sim, &zero, &[0]).is_err());
        // Selected cells hold no simulated crime.
        assert!(fai(&sim, &real, &[2, 3]).is_err());
    }

    #[test]
    fn prf_examples() {
        let real = raster(1, 4, vec![5.0, 12.0, 0.0, 3.0]);
        // Identical rasters: perfect at any threshold at or below max.
        let (p, r, f) = hotspot_prf(&real, &real, 3.0).unwrap();
        assert_eq!((p, r, f), (1.0, 1.0, 1.0));

        // Predicted {0, 1}, actual {1, 3} at threshold 4: tp = 1.
        let sim = raster(1, 4, vec![6.0, 11.0, 0.0, 1.0]);
        let real2 = raster(1, 4, vec![1.0, 9.0, 0.0, 7.0]);
        let (p, r, f) = hotspot_prf(&sim, &real2, 4.0).unwrap();
        assert_eq!((p, r), (0.5, 0.5));
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);

        // Threshold above every count: all zero, F1 well-defined.
        let (p, r, f) = hotspot_prf(&sim, &real2, 1000.0).unwrap();
        assert_eq!((p, r, f), (0.0, 0.0, 0.0));

        assert!(hotspot_prf(&sim, &real2, 0.0).is_err());
    }

    fn two_district_grid() -> Grid {
        let spec = GridSpec::new(0.0, 0.0, 100.0, 2, 2).unwrap();
        let attrs = vec![
            CellAttr { row: 0, col: 0, district: Some(3), habitable: true, walkable: true },
            CellAttr { row: 0, col: 1, district: Some(3), habitable: false, walkable: true },
            CellAttr { row: 1, col: 0, district: Some(7), habitable: true, walkable: true },
            CellAttr { row: 1, col: 1, district: None, habitable: false, walkable: false },
        ];
        let districts = vec![
            DistrictInfo { id: 3, name: "east".into(), population: 10 },
            DistrictInfo { id: 7, name: "west".into(), population: 20 },
        ];
        build_grid(spec, &attrs, districts).unwrap()
    }

    #[test]
    fn district_vector_sums_by_district() {
        let grid = two_district_grid();
        let r = CountRaster::from_grid(&grid, vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        let v = district_vector(&grid, &r).unwrap();
        // Cell (1,1) has no district and drops out, even though its value
        // is nonzero; the ineligible-but-districted cell (0,1) counts.
        assert_eq!(v, vec![(3, 3.0), (7, 4.0)]);

        let zero = CountRaster::from_grid(&grid, vec![0.0; 4]).unwrap();
        assert_eq!(district_vector(&grid, &zero).unwrap(), vec![(3, 0.0), (7, 0.0)]);
    }

    #[test]
    fn evaluate_produces_full_report() {
        let grid = two_district_grid();
        let sim = CountRaster::from_grid(&grid, vec![9.0, 1.0, 4.0, 0.0]).unwrap();
        let real = CountRaster::from_grid(&grid, vec![7.0, 2.0, 5.0, 0.0]).unwrap();
        let report = evaluate(&grid, &sim, &real, &[0.34, 1.0], &[1.0, 5.0]).unwrap();
        assert_eq!(report.coverage.len(), 2);
        assert_eq!(report.hotspots.len(), 2);
        // PAI at full coverage is exactly 1.
        assert_eq!(report.coverage[1].pai, 1.0);
        // Two districts cannot support the rank tests.
        assert!(report.districts.is_none());
        for c in &report.coverage {
            assert!(c.pai.is_finite() && c.pei.is_finite() && c.fai.is_finite());
            assert!(c.pei <= 1.0 + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn pai_full_coverage_is_one(values in proptest::collection::vec(0u32..50, 16)) {
            let total: u32 = values.iter().sum();
            prop_assume!(total > 0);
            let r = raster(4, 4, values.iter().map(|&v| v as f64).collect());
            let all = top_coverage_cells(&r, 1.0).unwrap();
            prop_assert_eq!(pai(&r, &all).unwrap(), 1.0);
        }

        #[test]
        fn pei_never_exceeds_one(
            sim in proptest::collection::vec(0u32..50, 16),
            real in proptest::collection::vec(0u32..50, 16),
            cov in 0.1f64..1.0,
        ) {
            prop_assume!(real.iter().sum::<u32>() > 0);
            let s = raster(4, 4, sim.iter().map(|&v| v as f64).collect());
            let r = raster(4, 4, real.iter().map(|&v| v as f64).collect());
            let (p, ps, pei) = pai_star_and_pei(&s, &r, cov).unwrap();
            prop_assert!(p <= ps + 1e-12);
            prop_assert!(pei <= 1.0 + 1e-12);
        }

        #[test]
        fn fai_proportional_rasters_score_one(
            base in proptest::collection::vec(0u32..50, 16),
            scale in 1u32..5,
            cov in 0.1f64..1.0,
        ) {
            prop_assume!(base.iter().sum::<u32>() > 0);
            let r = raster(4, 4, base.iter().map(|&v| v as f64).collect());
            let s = raster(4, 4, base.iter().map(|&v| (v * scale) as f64).collect());
            // The top simulated cells always hold simulated mass, so FAI
            // is defined and exactly 1 for proportional rasters.
            let selected = top_coverage_cells(&s, cov).unwrap();
            prop_assert!((fai(&s, &r, &selected).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn prf_precision_equals_recall_for_equal_set_sizes(
            sim in proptest::collection::vec(0u32..20, 16),
            real in proptest::collection::vec(0u32..20, 16),
            threshold in 1u32..15,
        ) {
            let t = threshold as f64;
            let s = raster(4, 4, sim.iter().map(|&v| v as f64).collect());
            let r = raster(4, 4, real.iter().map(|&v| v as f64).collect());
            let n_pred = sim.iter().filter(|&&v| v as f64 >= t).count();
            let n_act = real.iter().filter(|&&v| v as f64 >= t).count();
            let (p, rec, f) = hotspot_prf(&s, &r, t).unwrap();
            if n_pred == n_act {
                prop_assert!((p - rec).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=1.0).contains(&rec));
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
