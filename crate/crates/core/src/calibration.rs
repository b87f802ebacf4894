//! Replicated parameter sweeps for the latent behavioral parameters and
//! selection of the best configuration against a held-out year.
//!
//! Each candidate configuration is simulated many times with derived
//! seeds, per-cell counts are averaged across replications, and the
//! averaged raster is scored with the metrics module. Configurations
//! share the same derived seed sequence, so they face common random
//! numbers and their scores differ only through the parameters.
//! Police units are never deployed while calibrating.

use rayon::prelude::*;
use serde::Serialize;

use crate::crimestats::CellTrend;
use crate::engine::{run_year, SimParams, StaticPatrol};
use crate::error::{Error, Result};
use crate::geodata::Grid;
use crate::metrics::{
    evaluate, CountRaster, MetricsReport, DEFAULT_COVERAGES, DEFAULT_THRESHOLDS,
};

/// Replication seed: one splitmix64 mixing of `master + index`. Distinct
/// indices give well-separated generator states even for adjacent masters.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Candidate value lists for the swept parameters plus the fixed base.
/// Every combination is evaluated; job-market probabilities stay at their
/// base values.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub mu_values: Vec<f64>,
    pub nearby_values: Vec<f64>,
    pub downtown_values: Vec<f64>,
    pub replications: usize,
    pub base: SimParams,
    pub master_seed: u64,
}

impl SweepConfig {
    /// The standard calibration grid: mu in {0.10, 0.15}, nearby leisure
    /// in {0.50, 0.60}, downtown leisure in {0.075, 0.100}, 200
    /// replications each.
    pub fn standard(base: SimParams, master_seed: u64) -> Self {
        SweepConfig {
            mu_values: vec![0.10, 0.15],
            nearby_values: vec![0.50, 0.60],
            downtown_values: vec![0.075, 0.100],
            replications: 200,
            base,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("sweep needs at least 1 replication".into()));
        }
        if self.mu_values.is_empty() || self.nearby_values.is_empty() || self.downtown_values.is_empty() {
            return Err(Error::Config("sweep candidate lists must be nonempty".into()));
        }
        self.base.validate()
    }

    pub fn n_configs(&self) -> usize {
        self.mu_values.len() * self.nearby_values.len() * self.downtown_values.len()
    }

    /// All combinations in id order: mu varies slowest, the downtown
    /// probability fastest. Ids start at 1.
    pub fn enumerate(&self) -> Vec<CandidateConfig> {
        let mut out = Vec::with_capacity(self.n_configs());
        let mut id = 1;
        for &mu in &self.mu_values {
            for &near in &self.nearby_values {
                for &down in &self.downtown_values {
                    out.push(CandidateConfig { id, mu, nearby: near, downtown: down });
                    id += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateConfig {
    pub id: usize,
    pub mu: f64,
    pub nearby: f64,
    pub downtown: f64,
}

impl CandidateConfig {
    pub fn apply(&self, base: &SimParams) -> SimParams {
        let mut p = base.clone();
        p.unemployment_crime_increase = self.mu;
        p.nearby_leisure_probability = self.nearby;
        p.downtown_leisure_probability = self.downtown;
        p
    }
}

/// One scored configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigReport {
    pub config: CandidateConfig,
    pub replications: usize,
    /// Rank under [`rank_reports`]; 1 is best.
    pub rank: usize,
    /// Mean per-cell crime count over replications, row-major. Exported
    /// as a raster file, not in the JSON report.
    #[serde(skip_serializing)]
    pub mean_counts: Vec<f64>,
    pub metrics: MetricsReport,
}

/// Mean per-cell crime counts over one replication per seed, run without
/// police and with a fixed patrol placeholder. Replications run in
/// parallel; the aggregation is an integer sum, so the result does not
/// depend on completion order.
pub fn run_config_seeded(
    params: &SimParams,
    grid: &Grid,
    trends: &[CellTrend],
    seeds: &[u64],
) -> Result<Vec<f64>> {
    if seeds.is_empty() {
        return Err(Error::Config("calibration needs at least 1 replication".into()));
    }
    let mut calib = params.clone();
    calib.n_police_units = 0;
    let per_rep: Vec<Vec<u32>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut p = calib.clone();
            p.seed = seed;
            run_year(grid, trends, p, &StaticPatrol).map(|r| r.cell_counts)
        })
        .collect::<Result<_>>()?;
    let n_cells = grid.n_cells();
    let mut sums = vec![0u64; n_cells];
    for counts in &per_rep {
        for (s, &c) in sums.iter_mut().zip(counts) {
            *s += u64::from(c);
        }
    }
    let n = seeds.len() as f64;
    Ok(sums.into_iter().map(|s| s as f64 / n).collect())
}

/// [`run_config_seeded`] with the standard derived-seed sequence
/// `derive_seed(master, 0..replications)`.
pub fn run_config(
    params: &SimParams,
    grid: &Grid,
    trends: &[CellTrend],
    replications: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let seeds: Vec<u64> = (0..replications as u64).map(|i| derive_seed(master_seed, i)).collect();
    run_config_seeded(params, grid, trends, &seeds)
}

/// Orders report indices best-first: FAI at 5% coverage descending, then
/// PAI at 3% descending, then configuration id ascending.
pub fn rank_reports(reports: &[ConfigReport]) -> Vec<usize> {
    let key = |r: &ConfigReport| -> (f64, f64) {
        let fai5 = r.metrics.coverage_entry(0.05).map_or(f64::NEG_INFINITY, |c| c.fai);
        let pai3 = r.metrics.coverage_entry(0.03).map_or(f64::NEG_INFINITY, |c| c.pai);
        (fai5, pai3)
    };
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, pa) = key(&reports[a]);
        let (fb, pb) = key(&reports[b]);
        fb.total_cmp(&fa)
            .then(pb.total_cmp(&pa))
            .then(reports[a].config.id.cmp(&reports[b].config.id))
    });
    order
}

/// Runs the full sweep and scores every configuration against the
/// held-out raster. Reports come back in id order with their rank filled
/// in. Every configuration sees the same derived seed sequence.
pub fn sweep(
    cfg: &SweepConfig,
    grid: &Grid,
    trends: &[CellTrend],
    heldout: &CountRaster,
) -> Result<Vec<ConfigReport>> {
    cfg.validate()?;
    if heldout.values().len() != grid.n_cells() {
        return Err(Error::Config("held-out raster does not match the grid".into()));
    }
    let mut reports = Vec::with_capacity(cfg.n_configs());
    for cand in cfg.enumerate() {
        let params = cand.apply(&cfg.base);
        params.validate()?;
        let mean = run_config(&params, grid, trends, cfg.replications, cfg.master_seed)?;
        let raster = CountRaster::from_grid(grid, mean.clone())?;
        let metrics = evaluate(grid, &raster, heldout, &DEFAULT_COVERAGES, &DEFAULT_THRESHOLDS)?;
        reports.push(ConfigReport {
            config: cand,
            replications: cfg.replications,
            rank: 0,
            mean_counts: mean,
            metrics,
        });
    }
    for (pos, idx) in rank_reports(&reports).into_iter().enumerate() {
        reports[idx].rank = pos + 1;
    }
    Ok(reports)
}
