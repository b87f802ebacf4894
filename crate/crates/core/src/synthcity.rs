//! Synthetic cities with a known ground-truth crime intensity.
//!
//! A [`SynthSpec`] describes a rectangular city: row-band districts, a
//! per-cell base intensity (crimes per year) and a per-cell linear yearly
//! trend. [`gen_city`] turns it into the cell-attribute and district
//! tables the environment builder consumes plus the intensity surface;
//! [`gen_crimes`] samples Poisson counts from that surface and scatters
//! each offense uniformly inside its cell. Both are deterministic given
//! the seed, which makes the whole pipeline testable end to end without
//! any confidential data.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geodata::{CellAttr, CellId, CellYearSeries, CrimeRecord, DistrictId, DistrictInfo, Grid, GridSpec};

/// Blueprint for a synthetic city.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Districts tile the grid as contiguous horizontal row bands with ids
    /// 1..=n_districts, band 1 at row 0.
    pub n_districts: usize,
    /// Which band counts as downtown for leisure trips.
    pub downtown_district: DistrictId,
    pub cell_side_m: f64,
    pub origin: (f64, f64),
    /// Intensity at the first year, crimes per cell per year, row-major.
    pub base: Vec<f64>,
    /// Yearly intensity change per cell.
    pub trend: Vec<f64>,
    /// Masked cells carry no intensity and are left out of the attribute
    /// table entirely (not habitable, not walkable).
    pub masked: Vec<bool>,
    /// Inclusive year range.
    pub years: (i32, i32),
    /// Citywide population spread over districts in proportion to their
    /// base intensity mass.
    pub total_population: u64,
    /// Category stamped on every generated record.
    pub category: String,
    pub seed: u64,
}

impl SynthSpec {
    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.origin.0, self.origin.1, self.cell_side_m, self.n_rows, self.n_cols)
    }

    /// Row bands of near-equal height: row `r` belongs to district
    /// `r * n_districts / n_rows + 1`.
    pub fn district_of_row(&self, row: usize) -> DistrictId {
        (row * self.n_districts / self.n_rows) as DistrictId + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        if self.n_districts == 0 || self.n_districts > self.n_rows {
            return Err(Error::Config(format!(
                "need between 1 and {} districts, got {}",
                self.n_rows, self.n_districts
            )));
        }
        if self.downtown_district == 0 || self.downtown_district as usize > self.n_districts {
            return Err(Error::Config(format!(
                "downtown district {} outside 1..={}",
                self.downtown_district, self.n_districts
            )));
        }
        let n = self.n_cells();
        if self.base.len() != n || self.trend.len() != n || self.masked.len() != n {
            return Err(Error::Config(format!(
                "intensity tables must cover all {n} cells, got base {}, trend {}, mask {}",
                self.base.len(),
                self.trend.len(),
                self.masked.len()
            )));
        }
        if self.years.0 > self.years.1 {
            return Err(Error::Config(format!(
                "year range {}..={} is empty",
                self.years.0, self.years.1
            )));
        }
        if self.total_population == 0 {
            return Err(Error::Config("synthetic city needs population".into()));
        }
        if self.category.is_empty() {
            return Err(Error::Config("crime category must be nonempty".into()));
        }
        let span = (self.years.1 - self.years.0) as f64;
        for id in 0..n {
            if self.masked[id] {
                continue;
            }
            let (b, t) = (self.base[id], self.trend[id]);
            if !b.is_finite() || b < 0.0 || !t.is_finite() {
                return Err(Error::Config(format!(
                    "cell {id}: base must be finite and >= 0, trend finite (got {b}, {t})"
                )));
            }
            // Affine in the year, so the minimum sits at an endpoint.
            if b + t * span < 0.0 {
                return Err(Error::Config(format!(
                    "cell {id}: intensity goes negative by year {} (base {b}, trend {t})",
                    self.years.1
                )));
            }
        }
        Ok(())
    }

    /// A seeded demo city: a flat background plus three Gaussian bumps of
    /// crime intensity, each growing a few percent per year. Downtown is
    /// the band holding the hottest cell.
    pub fn hotspot_demo(n_rows: usize, n_cols: usize, n_districts: usize, n_years: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_rows * n_cols;
        let mut base = vec![0.3; n];
        for _ in 0..3 {
            let cr = rng.random_range(0..n_rows) as f64;
            let cc = rng.random_range(0..n_cols) as f64;
            let amp: f64 = rng.random_range(6.0..12.0);
            let sigma: f64 = rng.random_range(1.5..3.0);
            for row in 0..n_rows {
                for col in 0..n_cols {
                    let d2 = (row as f64 - cr).powi(2) + (col as f64 - cc).powi(2);
                    base[row * n_cols + col] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        let trend: Vec<f64> = base.iter().map(|b| 0.04 * b).collect();
        let hottest = (0..n).max_by(|&a, &b| base[a].total_cmp(&base[b])).unwrap();
        let spec = SynthSpec {
            n_rows,
            n_cols,
            n_districts,
            downtown_district: 1,
            cell_side_m: 100.0,
            origin: (0.0, 0.0),
            base,
            trend,
            masked: vec![false; n],
            years: (2010, 2010 + n_years.max(1) as i32 - 1),
            total_population: 10_000,
            category: "theft".into(),
            seed,
        };
        SynthSpec { downtown_district: spec.district_of_row(hottest / n_cols), ..spec }
    }
}

/// Ground-truth expected crime counts per cell per year.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    n_cells: usize,
    years: Vec<i32>,
    /// Flat `[cell * n_years + year_index]`.
    values: Vec<f64>,
}

impl IntensityField {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn lambda(&self, cell: CellId, year_index: usize) -> f64 {
        self.values[cell * self.years.len() + year_index]
    }

    /// All cells' intensity for one year index, row-major.
    pub fn year_slice(&self, year_index: usize) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.lambda(c, year_index)).collect()
    }
}

/// Everything [`gen_city`] produces: the tables the environment builder
/// consumes plus the intensity ground truth.
#[derive(Debug, Clone)]
pub struct SynthCity {
    pub attrs: Vec<CellAttr>,
    pub districts: Vec<DistrictInfo>,
    pub intensity: IntensityField,
}

/// Expands a spec into attribute and district tables plus the intensity
/// surface. Masked cells are skipped in the tables and carry zero
/// intensity; every other cell is habitable and walkable. District
/// populations split `total_population` in proportion to base intensity
/// mass (uniformly when the city has no intensity at all); fully masked
/// districts get zero.
pub fn gen_city(spec: &SynthSpec) -> Result<SynthCity> {
    spec.validate()?;
    let n_years = (spec.years.1 - spec.years.0 + 1) as usize;
    let n = spec.n_cells();

    let mut attrs = Vec::new();
    let mut values = vec![0.0; n * n_years];
    let mut mass = vec![0.0f64; spec.n_districts];
    let mut open_cells = vec![0usize; spec.n_districts];
    for row in 0..spec.n_rows {
        let district = spec.district_of_row(row);
        for col in 0..spec.n_cols {
            let id = row * spec.n_cols + col;
            if spec.masked[id] {
                continue;
            }
            attrs.push(CellAttr {
                row: row as u32,
                col: col as u32,
                district: Some(district),
                habitable: true,
                walkable: true,
            });
            mass[district as usize - 1] += spec.base[id];
            open_cells[district as usize - 1] += 1;
            for t in 0..n_years {
                values[id * n_years + t] = (spec.base[id] + spec.trend[id] * t as f64).max(0.0);
            }
        }
    }

    let total_mass: f64 = mass.iter().sum();
    let open_total: usize = open_cells.iter().sum();
    let districts = (1..=spec.n_districts)
        .map(|d| {
            let share = if total_mass > 0.0 {
                mass[d - 1] / total_mass
            } else if open_total > 0 {
                open_cells[d - 1] as f64 / open_total as f64
            } else {
                0.0
            };
            let population = if open_cells[d - 1] == 0 {
                0
            } else {
                ((spec.total_population as f64 * share).round() as u64).max(1)
            };
            DistrictInfo { id: d as DistrictId, name: format!("district-{d}"), population }
        })
        .collect();

    let years: Vec<i32> = (spec.years.0..=spec.years.1).collect();
    Ok(SynthCity { attrs, districts, intensity: IntensityField { n_cells: n, years, values } })
}

/// Samples crimes from the intensity surface: per cell per year a
/// Poisson(lambda) count, then a uniform position inside the cell for each
/// offense. Zero-intensity cell-years consume no randomness. Records come
/// out year-major, then cell-major, and carry the cell's district.
/// Positions keep a small margin from cell edges so every record locates
/// back to its source cell exactly.
///
/// Returns the records together with the drawn ground-truth counts.
pub fn gen_crimes(
    grid: &Grid,
    intensity: &IntensityField,
    category: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<CrimeRecord>, CellYearSeries)> {
    if intensity.n_cells() != grid.n_cells() {
        return Err(Error::Config(format!(
            "intensity covers {} cells but the grid has {}",
            intensity.n_cells(),
            grid.n_cells()
        )));
    }
    let years = intensity.years();
    let mut series = CellYearSeries::zeros(years[0], years[years.len() - 1], grid.n_cells())?;
    let mut records = Vec::new();
    let side = grid.spec.cell_side;
    for (t, &year) in years.iter().enumerate() {
        for cell in 0..grid.n_cells() {
            let lambda = intensity.lambda(cell, t);
            if lambda <= 0.0 {
                continue;
            }
            let dist = Poisson::new(lambda).expect("positive finite intensity");
            let count = dist.sample(rng) as u32;
            if count == 0 {
                continue;
            }
            series.add(cell, year, count);
            let (row, col) = grid.spec.coords(cell);
            let (cx, cy) = grid.spec.cell_center(row, col);
            let district = grid.cell(cell).district;
            for _ in 0..count {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                records.push(CrimeRecord {
                    year,
                    easting: cx + (u - 0.5) * side * 0.999,
                    northing: cy + (v - 0.5) * side * 0.999,
                    category: category.to_string(),
                    district,
                });
            }
        }
    }
    Ok((records, series))
}

/// Formats the intensity surface like the yearly count table:
/// `row,col,<year>...` with one row per cell in row-major order.
pub fn format_intensity_csv(spec: &GridSpec, field: &IntensityField) -> String {
    let mut out = String::new();
    let years: Vec<String> = field.years().iter().map(|y| y.to_string()).collect();
    out.push_str(&format!("row,col,{}\n", years.join(",")));
    for cell in 0..field.n_cells() {
        let (row, col) = spec.coords(cell);
        let vals: Vec<String> =
            (0..field.years().len()).map(|t| field.lambda(cell, t).to_string()).collect();
        out.push_str(&format!("{},{},{}\n", row, col, vals.join(",")));
    }
    out
}
