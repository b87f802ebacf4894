//! JSON run configuration: a flat key set mirroring the global model
//! parameters, plus input paths, grid geometry, sweep settings, and output
//! toggles. Every key has a default, so `{}` is a valid configuration;
//! unknown keys are rejected. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::SweepConfig;
use crate::engine::{builtin_strategy, DeterrenceModel, SimParams};
use crate::error::{Error, Result};
use crate::geodata::{DistrictId, GridSpec, RowPolicy};
use crate::io;
use crate::population::RoleMix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Global model parameters.
    pub total_population: u64,
    pub n_citizens: usize,
    pub n_police_units: usize,
    pub find_job_probability: f64,
    pub lose_job_probability: f64,
    pub nearby_leisure_probability: f64,
    pub downtown_leisure_probability: f64,
    pub offense_rate: f64,
    pub unemployment_crime_increase: f64,
    pub police_reduction: f64,
    pub no_police_increase: f64,
    pub unemployment_rate: f64,
    pub morning_share: f64,
    pub afternoon_share: f64,
    pub night_share: f64,
    pub leisure_radius: f64,
    pub downtown_districts: Vec<DistrictId>,
    pub power_refresh_days: u32,
    pub police_window_days: u32,
    pub deterrence_model: DeterrenceModel,
    pub seed: u64,
    /// Patrol strategy name: static, random, or top_power.
    pub strategy: String,

    // Grid geometry.
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub cell_side_m: f64,
    pub origin_easting: f64,
    pub origin_northing: f64,

    // Input files, resolved relative to the working directory.
    pub crime_csv: Option<PathBuf>,
    pub cell_attrs_csv: Option<PathBuf>,
    pub buildings_csv: Option<PathBuf>,
    pub land_mask_csv: Option<PathBuf>,
    pub districts_csv: Option<PathBuf>,
    /// Accepted crime categories; empty accepts everything.
    pub crime_categories: Vec<String>,
    /// What to do with malformed crime rows: "abort" or "skip".
    pub malformed_rows: String,
    /// Years aggregated into the count table; omitted = span of the data.
    pub year_range: Option<(i32, i32)>,
    /// Year the simulation reproduces. Trends train on strictly earlier
    /// years. Omitted = the year after the last one in the count table.
    pub target_year: Option<i32>,

    // Calibration sweep.
    pub mu_values: Vec<f64>,
    pub nearby_values: Vec<f64>,
    pub downtown_values: Vec<f64>,
    pub replications: usize,

    // Outputs.
    pub out_dir: PathBuf,
    pub write_events: bool,
    pub write_heatmap: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SimParams::default();
        let g = GridSpec::malaga();
        RunConfig {
            total_population: p.total_population,
            n_citizens: p.n_citizens,
            n_police_units: p.n_police_units,
            find_job_probability: p.find_job_probability,
            lose_job_probability: p.lose_job_probability,
            nearby_leisure_probability: p.nearby_leisure_probability,
            downtown_leisure_probability: p.downtown_leisure_probability,
            offense_rate: p.offense_rate,
            unemployment_crime_increase: p.unemployment_crime_increase,
            police_reduction: p.police_reduction,
            no_police_increase: p.no_police_increase,
            unemployment_rate: p.unemployment_rate,
            morning_share: p.role_mix.morning,
            afternoon_share: p.role_mix.afternoon,
            night_share: p.role_mix.night,
            leisure_radius: p.leisure_radius,
            downtown_districts: p.downtown_districts.clone(),
            power_refresh_days: p.power_refresh_days,
            police_window_days: p.police_window_days,
            deterrence_model: p.deterrence_model,
            seed: p.seed,
            strategy: "static".into(),
            grid_rows: g.n_rows,
            grid_cols: g.n_cols,
            cell_side_m: g.cell_side,
            origin_easting: g.origin_easting,
            origin_northing: g.origin_northing,
            crime_csv: None,
            cell_attrs_csv: None,
            buildings_csv: None,
            land_mask_csv: None,
            districts_csv: None,
            crime_categories: Vec::new(),
            malformed_rows: "abort".into(),
            year_range: None,
            target_year: None,
            mu_values: vec![0.10, 0.15],
            nearby_values: vec![0.50, 0.60],
            downtown_values: vec![0.075, 0.100],
            replications: 200,
            out_dir: PathBuf::from("out"),
            write_events: true,
            write_heatmap: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = io::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.to_sim_params().validate()?;
        self.grid_spec()?;
        self.row_policy()?;
        builtin_strategy(&self.strategy)?;
        if let Some((a, b)) = self.year_range {
            if a > b {
                return Err(Error::Config(format!("year_range {a}..={b} is empty")));
            }
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        for (name, list) in [
            ("mu_values", &self.mu_values),
            ("nearby_values", &self.nearby_values),
            ("downtown_values", &self.downtown_values),
        ] {
            if list.is_empty() {
                return Err(Error::Config(format!("{name} must be nonempty")));
            }
        }
        Ok(())
    }

    pub fn to_sim_params(&self) -> SimParams {
        SimParams {
            total_population: self.total_population,
            n_citizens: self.n_citizens,
            n_police_units: self.n_police_units,
            find_job_probability: self.find_job_probability,
            lose_job_probability: self.lose_job_probability,
            nearby_leisure_probability: self.nearby_leisure_probability,
            downtown_leisure_probability: self.downtown_leisure_probability,
            offense_rate: self.offense_rate,
            unemployment_crime_increase: self.unemployment_crime_increase,
            police_reduction: self.police_reduction,
            no_police_increase: self.no_police_increase,
            unemployment_rate: self.unemployment_rate,
            role_mix: RoleMix {
                morning: self.morning_share,
                afternoon: self.afternoon_share,
                night: self.night_share,
            },
            leisure_radius: self.leisure_radius,
            downtown_districts: self.downtown_districts.clone(),
            power_refresh_days: self.power_refresh_days,
            police_window_days: self.police_window_days,
            deterrence_model: self.deterrence_model,
            seed: self.seed,
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.origin_easting,
            self.origin_northing,
            self.cell_side_m,
            self.grid_rows,
            self.grid_cols,
        )
    }

    pub fn row_policy(&self) -> Result<RowPolicy> {
        self.malformed_rows
            .parse()
            .map_err(|_| Error::Config(format!("malformed_rows must be \"abort\" or \"skip\", got {:?}", self.malformed_rows)))
    }

    pub fn to_sweep(&self) -> SweepConfig {
        SweepConfig {
            mu_values: self.mu_values.clone(),
            nearby_values: self.nearby_values.clone(),
            downtown_values: self.downtown_values.clone(),
            replications: self.replications,
            base: self.to_sim_params(),
            master_seed: self.seed,
        }
    }

}
