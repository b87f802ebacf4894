//! Command implementations behind the binary's subcommands. Each one is a
//! pure function of the configuration and its input files: outputs are
//! written atomically under the configured output directory and rerunning
//! a command reproduces them byte for byte.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calibration::{sweep, ConfigReport};
use crate::config::RunConfig;
use crate::crimestats::fit_trends;
use crate::engine::{builtin_strategy, run_year};
use crate::error::{Error, Result};
use crate::geodata::{
    aggregate_yearly, build_grid, derive_cell_attrs, parse_buildings_csv, parse_cell_attrs_csv,
    parse_crime_csv, parse_districts_csv, parse_land_mask_csv, read_counts_by_year,
    write_cell_attrs_csv, write_crime_csv, write_districts_csv, write_counts_by_year,
    CellYearSeries, DistrictId, Grid,
};
use crate::io;
use crate::metrics::{
    evaluate, CountRaster, MetricsReport, DEFAULT_COVERAGES, DEFAULT_THRESHOLDS,
};
use crate::synthcity::{format_intensity_csv, gen_city, gen_crimes, SynthSpec};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// What the environment builder ingested and produced.
#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    /// Crime records placed into a cell.
    pub located: usize,
    /// Records whose coordinates fall outside the grid.
    pub dropped_out_of_bounds: usize,
    /// Records outside the aggregated year range.
    pub dropped_out_of_year_range: usize,
    /// Malformed rows dropped under the "skip" policy.
    pub skipped_malformed: usize,
    /// Rows dropped by the category allow-list.
    pub dropped_category: usize,
    pub year_start: i32,
    pub year_end: i32,
    pub n_districts: usize,
    pub n_habitable_cells: usize,
    pub n_walkable_cells: usize,
}

/// Reads the raw inputs, assembles the grid, bins crimes per cell and
/// year, and writes `grid.csv`, `districts.csv`, `counts_by_year.csv` and
/// `build_report.json` into the output directory.
pub fn cmd_build_env(cfg: &RunConfig) -> Result<BuildReport> {
    let spec = cfg.grid_spec()?;

    let districts_path = cfg
        .districts_csv
        .as_ref()
        .ok_or_else(|| Error::Config("districts_csv is required to build the environment".into()))?;
    let districts = parse_districts_csv(io::open(districts_path)?, &path_str(districts_path))?;

    let attrs = if let Some(path) = &cfg.cell_attrs_csv {
        parse_cell_attrs_csv(io::open(path)?, &path_str(path))?
    } else if let Some(path) = &cfg.buildings_csv {
        let buildings = parse_buildings_csv(io::open(path)?, &path_str(path))?;
        let mask = match &cfg.land_mask_csv {
            Some(p) => parse_land_mask_csv(io::open(p)?, &path_str(p))?,
            None => Vec::new(),
        };
        derive_cell_attrs(&buildings, &mask, &spec)
    } else {
        return Err(Error::Config(
            "either cell_attrs_csv or buildings_csv is required to build the environment".into(),
        ));
    };
    let grid = build_grid(spec, &attrs, districts)?;

    let crime_path = cfg
        .crime_csv
        .as_ref()
        .ok_or_else(|| Error::Config("crime_csv is required to build the environment".into()))?;
    let parsed = parse_crime_csv(
        io::open(crime_path)?,
        &path_str(crime_path),
        &cfg.crime_categories,
        cfg.row_policy()?,
    )?;

    let year_range = match cfg.year_range {
        Some(r) => r,
        None => {
            let years: Vec<i32> = parsed.records.iter().map(|r| r.year).collect();
            match (years.iter().min(), years.iter().max()) {
                (Some(&a), Some(&b)) => (a, b),
                _ => {
                    return Err(Error::Config(
                        "crime file has no records; set year_range explicitly".into(),
                    ))
                }
            }
        }
    };
    let (series, stats) = aggregate_yearly(&parsed.records, &grid.spec, year_range)?;

    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut buf = Vec::new();
    write_cell_attrs_csv(&mut buf, &grid.to_attrs()).map_err(|e| Error::io(&cfg.out_dir.join("grid.csv"), e))?;
    io::write_atomic(&cfg.out_dir.join("grid.csv"), &buf)?;

    buf = Vec::new();
    write_districts_csv(&mut buf, &grid.districts)
        .map_err(|e| Error::io(&cfg.out_dir.join("districts.csv"), e))?;
    io::write_atomic(&cfg.out_dir.join("districts.csv"), &buf)?;

    buf = Vec::new();
    write_counts_by_year(&mut buf, &series, &grid.spec)
        .map_err(|e| Error::io(&cfg.out_dir.join("counts_by_year.csv"), e))?;
    io::write_atomic(&cfg.out_dir.join("counts_by_year.csv"), &buf)?;

    let report = BuildReport {
        located: stats.located,
        dropped_out_of_bounds: stats.unlocatable,
        dropped_out_of_year_range: stats.out_of_year_range,
        skipped_malformed: parsed.skipped_malformed,
        dropped_category: parsed.dropped_category,
        year_start: year_range.0,
        year_end: year_range.1,
        n_districts: grid.districts.len(),
        n_habitable_cells: grid.habitable_ids().len(),
        n_walkable_cells: grid.walkable_ids().len(),
    };
    write_json(&cfg.out_dir.join("build_report.json"), &report)?;
    Ok(report)
}

/// Loads the environment a previous `build-env` left in the output
/// directory.
fn load_env(cfg: &RunConfig) -> Result<(Grid, CellYearSeries)> {
    let spec = cfg.grid_spec()?;
    let grid_path = cfg.out_dir.join("grid.csv");
    let attrs = parse_cell_attrs_csv(io::open(&grid_path)?, &path_str(&grid_path))?;
    let districts_path = cfg.out_dir.join("districts.csv");
    let districts = parse_districts_csv(io::open(&districts_path)?, &path_str(&districts_path))?;
    let grid = build_grid(spec, &attrs, districts)?;
    let counts_path = cfg.out_dir.join("counts_by_year.csv");
    let series = read_counts_by_year(io::open(&counts_path)?, &path_str(&counts_path), &grid.spec)?;
    Ok((grid, series))
}

fn last_year(series: &CellYearSeries) -> i32 {
    series.years().last().expect("series covers at least one year")
}

#[derive(Debug, Clone, Serialize)]
pub struct DistrictCount {
    pub district: Option<DistrictId>,
    pub crimes: u64,
}

/// One finished run, as recorded in `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub seed: u64,
    pub target_year: i32,
    pub strategy: String,
    pub n_citizens: usize,
    pub n_police_units: usize,
    pub total_crimes: u64,
    pub district_counts: Vec<DistrictCount>,
    /// Unemployed share after the final day.
    pub final_unemployment: f64,
}

/// Simulates the target year on the built environment and writes
/// `counts.csv` (per-cell raster), `events.csv`, `summary.json` and
/// optionally `heatmap.pgm`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimSummary> {
    let (grid, series) = load_env(cfg)?;
    let target = cfg.target_year.unwrap_or_else(|| last_year(&series) + 1);
    let trends = fit_trends(&series, target)?;
    let params = cfg.to_sim_params();
    let strategy = builtin_strategy(&cfg.strategy)?;
    let result = run_year(&grid, &trends, params, strategy.as_ref())?;

    let counts: Vec<f64> = result.cell_counts.iter().map(|&c| c as f64).collect();
    let matrix = io::format_matrix_csv(&counts, grid.spec.n_rows, grid.spec.n_cols);
    io::write_atomic(&cfg.out_dir.join("counts.csv"), matrix.as_bytes())?;
    if cfg.write_events {
        let events = io::format_events_csv(&result.events);
        io::write_atomic(&cfg.out_dir.join("events.csv"), events.as_bytes())?;
    }
    if cfg.write_heatmap {
        let pgm = render_pgm(&counts, grid.spec.n_rows, grid.spec.n_cols, 4);
        io::write_atomic(&cfg.out_dir.join("heatmap.pgm"), pgm.as_bytes())?;
    }

    let summary = SimSummary {
        seed: result.seed,
        target_year: target,
        strategy: cfg.strategy.clone(),
        n_citizens: result.params.n_citizens,
        n_police_units: result.params.n_police_units,
        total_crimes: result.total_crimes(),
        district_counts: result
            .district_counts
            .iter()
            .map(|&(district, crimes)| DistrictCount { district, crimes })
            .collect(),
        final_unemployment: result.unemployment.last().copied().unwrap_or(0.0),
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Runs the calibration sweep against the held-out year (the last observed
/// year unless `target_year` says otherwise) and writes `sweep.json`,
/// `sweep.csv` and one averaged raster per configuration. Reports come
/// back in id order with ranks assigned.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Vec<ConfigReport>> {
    let (grid, series) = load_env(cfg)?;
    let heldout_year = cfg.target_year.unwrap_or_else(|| last_year(&series));
    let trends = fit_trends(&series, heldout_year)?;
    let heldout_counts: Vec<f64> =
        series.year_slice(heldout_year)?.iter().map(|&c| c as f64).collect();
    let heldout = CountRaster::from_grid(&grid, heldout_counts)?;

    let reports = sweep(&cfg.to_sweep(), &grid, &trends, &heldout)?;

    write_json(&cfg.out_dir.join("sweep.json"), &reports)?;
    io::write_atomic(&cfg.out_dir.join("sweep.csv"), sweep_csv(&reports).as_bytes())?;
    for r in &reports {
        let matrix = io::format_matrix_csv(&r.mean_counts, grid.spec.n_rows, grid.spec.n_cols);
        let path = cfg.out_dir.join(format!("config_{}_counts.csv", r.config.id));
        io::write_atomic(&path, matrix.as_bytes())?;
    }
    Ok(reports)
}

/// One row per configuration in id order, every metric in the columns.
fn sweep_csv(reports: &[ConfigReport]) -> String {
    let mut header = vec![
        "id".to_string(),
        "mu".into(),
        "nearby_leisure_probability".into(),
        "downtown_leisure_probability".into(),
        "replications".into(),
        "rank".into(),
    ];
    for c in DEFAULT_COVERAGES {
        let pct = (c * 100.0).round() as u32;
        for name in ["pai", "pai_star", "pei", "fai"] {
            header.push(format!("{name}_{pct}"));
        }
    }
    for t in DEFAULT_THRESHOLDS {
        for name in ["precision", "recall", "f1"] {
            header.push(format!("{name}_{}", t as u32));
        }
    }
    for name in [
        "spearman_rho",
        "spearman_p",
        "t_stat",
        "t_df",
        "t_p",
        "wilcoxon_w",
        "wilcoxon_z",
        "wilcoxon_p",
    ] {
        header.push(name.into());
    }

    let mut out = header.join(",");
    out.push('\n');
    for r in reports {
        let mut row = vec![
            r.config.id.to_string(),
            r.config.mu.to_string(),
            r.config.nearby.to_string(),
            r.config.downtown.to_string(),
            r.replications.to_string(),
            r.rank.to_string(),
        ];
        for c in DEFAULT_COVERAGES {
            let e = r.metrics.coverage_entry(c).expect("sweep scores default coverages");
            for v in [e.pai, e.pai_star, e.pei, e.fai] {
                row.push(v.to_string());
            }
        }
        for t in DEFAULT_THRESHOLDS {
            let e = r.metrics.threshold_entry(t).expect("sweep scores default thresholds");
            for v in [e.precision, e.recall, e.f1] {
                row.push(v.to_string());
            }
        }
        match &r.metrics.districts {
            Some(d) => {
                for v in [d.spearman_rho, d.spearman_p, d.t_stat] {
                    row.push(v.to_string());
                }
                row.push(d.t_df.to_string());
                for v in [d.t_p, d.wilcoxon_w, d.wilcoxon_z, d.wilcoxon_p] {
                    row.push(v.to_string());
                }
            }
            None => row.extend(std::iter::repeat(String::new()).take(8)),
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Scores a simulated raster against an observed one and writes
/// `metrics.json`, `pai_pei_fai.csv` and `prf.csv`.
pub fn cmd_evaluate(cfg: &RunConfig, sim_path: &Path, real_path: &Path) -> Result<MetricsReport> {
    let (grid, _) = load_env(cfg)?;
    let sim = load_raster(&grid, sim_path)?;
    let real = load_raster(&grid, real_path)?;
    let report = evaluate(&grid, &sim, &real, &DEFAULT_COVERAGES, &DEFAULT_THRESHOLDS)?;

    write_json(&cfg.out_dir.join("metrics.json"), &report)?;

    let mut table = String::from("coverage,pai,pai_star,pei,fai\n");
    for c in &report.coverage {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            c.coverage, c.pai, c.pai_star, c.pei, c.fai
        ));
    }
    io::write_atomic(&cfg.out_dir.join("pai_pei_fai.csv"), table.as_bytes())?;

    let mut prf = String::from("threshold,precision,recall,f1\n");
    for h in &report.hotspots {
        prf.push_str(&format!("{},{},{},{}\n", h.threshold, h.precision, h.recall, h.f1));
    }
    io::write_atomic(&cfg.out_dir.join("prf.csv"), prf.as_bytes())?;
    Ok(report)
}

fn load_raster(grid: &Grid, path: &Path) -> Result<CountRaster> {
    let (values, n_rows, n_cols) = io::parse_matrix_csv(io::open(path)?, &path_str(path))?;
    if n_rows != grid.spec.n_rows || n_cols != grid.spec.n_cols {
        return Err(Error::Metric(format!(
            "{}: raster is {n_rows}x{n_cols} but the grid is {}x{}",
            path.display(),
            grid.spec.n_rows,
            grid.spec.n_cols
        )));
    }
    CountRaster::from_grid(grid, values)
}

/// Renders a counts matrix to `heatmap.pgm` in the output directory and
/// returns the path.
pub fn cmd_report(counts_path: &Path, out_dir: &Path) -> Result<PathBuf> {
    let (values, n_rows, n_cols) = io::parse_matrix_csv(io::open(counts_path)?, &path_str(counts_path))?;
    let pgm = render_pgm(&values, n_rows, n_cols, 4);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("heatmap.pgm");
    io::write_atomic(&path, pgm.as_bytes())?;
    Ok(path)
}

/// Plain grayscale image of a counts raster: one `block` x `block` pixel
/// square per cell, brightness proportional to count / max count, black
/// when the raster is all zero. Row 0 sits at the bottom of the image, so
/// north is up.
pub fn render_pgm(values: &[f64], n_rows: usize, n_cols: usize, block: usize) -> String {
    debug_assert_eq!(values.len(), n_rows * n_cols);
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let mut out = format!("P2\n{} {}\n255\n", n_cols * block, n_rows * block);
    for row in (0..n_rows).rev() {
        let mut line = String::new();
        for col in 0..n_cols {
            let v = values[row * n_cols + col];
            let level = if max > 0.0 { (255.0 * v / max).round() as u32 } else { 0 };
            for b in 0..block {
                if col > 0 || b > 0 {
                    line.push(' ');
                }
                line.push_str(&level.to_string());
            }
        }
        line.push('\n');
        for _ in 0..block {
            out.push_str(&line);
        }
    }
    out
}

/// What the synthesizer wrote.
#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub n_records: usize,
    pub year_start: i32,
    pub year_end: i32,
    pub n_districts: usize,
    pub downtown_district: DistrictId,
}

/// Generates a synthetic city and writes the raw-input files the
/// environment builder consumes (`crimes.csv`, `grid.csv`,
/// `districts.csv`) plus the ground-truth `intensity.csv`.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<SynthSummary> {
    let city = gen_city(spec)?;
    let gspec = spec.grid_spec()?;
    let grid = build_grid(gspec, &city.attrs, city.districts.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (records, _) = gen_crimes(&grid, &city.intensity, &spec.category, &mut rng)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut buf = Vec::new();
    write_crime_csv(&mut buf, &records).map_err(|e| Error::io(&out_dir.join("crimes.csv"), e))?;
    io::write_atomic(&out_dir.join("crimes.csv"), &buf)?;

    buf = Vec::new();
    write_cell_attrs_csv(&mut buf, &city.attrs).map_err(|e| Error::io(&out_dir.join("grid.csv"), e))?;
    io::write_atomic(&out_dir.join("grid.csv"), &buf)?;

    buf = Vec::new();
    write_districts_csv(&mut buf, &city.districts)
        .map_err(|e| Error::io(&out_dir.join("districts.csv"), e))?;
    io::write_atomic(&out_dir.join("districts.csv"), &buf)?;

    let intensity = format_intensity_csv(&grid.spec, &city.intensity);
    io::write_atomic(&out_dir.join("intensity.csv"), intensity.as_bytes())?;

    Ok(SynthSummary {
        n_records: records.len(),
        year_start: spec.years.0,
        year_end: spec.years.1,
        n_districts: spec.n_districts,
        downtown_district: spec.downtown_district,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_and_scaling() {
        // 2x2 raster, single hot cell at (1, 0): top image rows show it
        // bright because row 1 renders first.
        let pgm = render_pgm(&[0.0, 0.0, 10.0, 0.0], 2, 2, 2);
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(lines[0], "P2");
        assert_eq!(lines[1], "4 4");
        assert_eq!(lines[2], "255");
        assert_eq!(lines[3], "255 255 0 0");
        assert_eq!(lines[4], "255 255 0 0");
        assert_eq!(lines[5], "0 0 0 0");
        assert_eq!(lines.len(), 7);

        // All-zero raster renders black.
        let black = render_pgm(&[0.0; 4], 2, 2, 4);
        let body: Vec<&str> = black.lines().skip(3).collect();
        assert_eq!(body.len(), 8);
        assert!(body.iter().all(|l| l.split(' ').all(|v| v == "0")));

        // Intermediate value scales against the max.
        let mid = render_pgm(&[5.0, 10.0], 1, 2, 1);
        assert_eq!(mid.lines().nth(3).unwrap(), "128 255");
    }
}
