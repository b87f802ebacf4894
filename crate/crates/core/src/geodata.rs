//! Grid geometry and ingestion of raw city data.
//!
//! Coordinates are planar (projected meters, e.g. UTM). The grid origin is
//! the south-west corner: row indices grow northward with northing, column
//! indices grow eastward with easting. Each cell covers the half-open square
//! `[origin + k*side, origin + (k+1)*side)` on both axes, so a point on the
//! shared edge of two cells belongs to the one with the larger index.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense cell index: `row * n_cols + col`.
pub type CellId = usize;
pub type DistrictId = u32;

/// Geometry of the raster: origin, cell side in meters, and shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_easting: f64,
    pub origin_northing: f64,
    pub cell_side: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    pub fn new(
        origin_easting: f64,
        origin_northing: f64,
        cell_side: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        if !origin_easting.is_finite() || !origin_northing.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        if !(cell_side.is_finite() && cell_side > 0.0) {
            return Err(Error::Config(format!("cell side must be positive, got {cell_side}")));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Config("grid must have at least one row and one column".into()));
        }
        Ok(GridSpec { origin_easting, origin_northing, cell_side, n_rows, n_cols })
    }

    /// The built-in Málaga raster: 80 x 128 cells of 195 m, UTM zone 30N.
    pub fn malaga() -> Self {
        GridSpec {
            origin_easting: 360_520.0,
            origin_northing: 4_056_900.0,
            cell_side: 195.0,
            n_rows: 80,
            n_cols: 128,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn index(&self, row: u32, col: u32) -> CellId {
        debug_assert!((row as usize) < self.n_rows && (col as usize) < self.n_cols);
        row as usize * self.n_cols + col as usize
    }

    pub fn coords(&self, id: CellId) -> (u32, u32) {
        debug_assert!(id < self.n_cells());
        ((id / self.n_cols) as u32, (id % self.n_cols) as u32)
    }

    pub fn cell_center(&self, row: u32, col: u32) -> (f64, f64) {
        (
            self.origin_easting + (col as f64 + 0.5) * self.cell_side,
            self.origin_northing + (row as f64 + 0.5) * self.cell_side,
        )
    }

    /// Cell containing the point, or `None` when the point falls outside the
    /// raster (non-finite coordinates count as outside).
    pub fn locate_point(&self, easting: f64, northing: f64) -> Option<(u32, u32)> {
        if !easting.is_finite() || !northing.is_finite() {
            return None;
        }
        let dx = (easting - self.origin_easting) / self.cell_side;
        let dy = (northing - self.origin_northing) / self.cell_side;
        if dx < 0.0 || dy < 0.0 {
            return None;
        }
        let (col, row) = (dx.floor(), dy.floor());
        if row >= self.n_rows as f64 || col >= self.n_cols as f64 {
            return None;
        }
        Some((row as u32, col as u32))
    }
}

/// One grid cell. `criminal_power` and `crime_counter` start at zero and are
/// only touched by the engine's working copy of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
    pub district: Option<DistrictId>,
    pub habitable: bool,
    pub walkable: bool,
    pub criminal_power: f64,
    pub crime_counter: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictInfo {
    pub id: DistrictId,
    pub name: String,
    pub population: u64,
}

/// Immutable city environment: geometry, cell attributes, district table.
/// Built once by [`build_grid`]; the engine clones it for mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub cells: Vec<Cell>,
    /// Sorted by ascending id; ids are unique.
    pub districts: Vec<DistrictInfo>,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn id(&self, row: u32, col: u32) -> CellId {
        self.spec.index(row, col)
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn walkable_ids(&self) -> Vec<CellId> {
        (0..self.cells.len()).filter(|&i| self.cells[i].walkable).collect()
    }

    pub fn habitable_ids(&self) -> Vec<CellId> {
        (0..self.cells.len()).filter(|&i| self.cells[i].habitable).collect()
    }

    /// Habitable cells grouped by district, ascending district id. Only
    /// districts that appear in the district table are listed.
    pub fn habitable_by_district(&self) -> Vec<(DistrictId, Vec<CellId>)> {
        let mut map: BTreeMap<DistrictId, Vec<CellId>> =
            self.districts.iter().map(|d| (d.id, Vec::new())).collect();
        for (i, c) in self.cells.iter().enumerate() {
            if c.habitable {
                if let Some(d) = c.district {
                    map.get_mut(&d).expect("district checked at build").push(i);
                }
            }
        }
        map.into_iter().collect()
    }

    /// Per-cell boolean mask of walkable cells.
    pub fn walkable_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.walkable).collect()
    }

    /// Cell attribute rows for every cell that differs from the default
    /// (no district, not habitable, not walkable), in row-major order.
    pub fn to_attrs(&self) -> Vec<CellAttr> {
        self.cells
            .iter()
            .filter(|c| c.district.is_some() || c.habitable || c.walkable)
            .map(|c| CellAttr {
                row: c.row,
                col: c.col,
                district: c.district,
                habitable: c.habitable,
                walkable: c.walkable,
            })
            .collect()
    }
}

/// One attribute row of the `row,col,district,habitable,walkable` table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAttr {
    pub row: u32,
    pub col: u32,
    pub district: Option<DistrictId>,
    pub habitable: bool,
    pub walkable: bool,
}

/// One geocoded offense record.
#[derive(Debug, Clone, PartialEq)]
pub struct CrimeRecord {
    pub year: i32,
    pub easting: f64,
    pub northing: f64,
    pub category: String,
    pub district: Option<DistrictId>,
}

/// One building point used to derive habitability.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingPoint {
    pub easting: f64,
    pub northing: f64,
    pub district: DistrictId,
}

/// What to do with a malformed data row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowPolicy {
    /// Fail on the first malformed row, reporting its line number.
    Abort,
    /// Drop malformed rows and count them.
    Skip,
}

impl FromStr for RowPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abort" => Ok(RowPolicy::Abort),
            "skip" => Ok(RowPolicy::Skip),
            other => Err(Error::Config(format!(
                "unknown row policy {other:?}, expected \"abort\" or \"skip\""
            ))),
        }
    }
}

/// Result of parsing a crime CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CrimeParse {
    pub records: Vec<CrimeRecord>,
    /// Malformed rows dropped under [`RowPolicy::Skip`].
    pub skipped_malformed: usize,
    /// Well-formed rows dropped by the category allow-list.
    pub dropped_category: usize,
}

fn check_header(src: &str, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().map(|f| f.trim()).collect();
    if got != want {
        return Err(Error::schema(
            src,
            1,
            format!("expected header {:?}, got {:?}", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::ByteRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn field_str<'a>(rec: &'a csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<&'a str, String> {
    let raw = rec.get(idx).ok_or_else(|| format!("missing field {name:?}"))?;
    std::str::from_utf8(raw).map_err(|_| format!("field {name:?} is not valid UTF-8"))
}

fn field_num<T: FromStr>(rec: &csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<T, String> {
    let s = field_str(rec, idx, name)?;
    s.trim().parse::<T>().map_err(|_| format!("cannot parse field {name:?} from {s:?}"))
}

fn field_opt_district(rec: &csv::ByteRecord, idx: usize) -> std::result::Result<Option<DistrictId>, String> {
    let s = field_str(rec, idx, "district")?;
    let t = s.trim();
    if t.is_empty() { Ok(None) } else { t.parse().map(Some).map_err(|_| format!("cannot parse field \"district\" from {s:?}")) }
}

fn field_flag(rec: &csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<bool, String> {
    match field_str(rec, idx, name)?.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("field {name:?} must be 0 or 1, got {other:?}")),
    }
}

fn field_finite(rec: &csv::ByteRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field_num(rec, idx, name)?;
    if v.is_finite() { Ok(v) } else { Err(format!("field {name:?} must be finite")) }
}

fn csv_reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().flexible(true).from_reader(input)
}

/// Parses `year,easting,northing,category,district` rows.
///
/// `allow` filters by exact category match; an empty list accepts everything.
/// The header row is mandatory and must match the schema exactly. Malformed
/// rows (wrong field count, bad numbers, non-finite coordinates, broken
/// UTF-8) are handled per `policy`; rows dropped by the category filter are
/// counted separately and are not errors.
pub fn parse_crime_csv(
    input: impl Read,
    src: &str,
    allow: &[String],
    policy: RowPolicy,
) -> Result<CrimeParse> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    check_header(src, &headers, &["year", "easting", "northing", "category", "district"])?;

    let mut out = CrimeParse { records: Vec::new(), skipped_malformed: 0, dropped_category: 0 };
    let mut raw = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => match policy {
                RowPolicy::Abort => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(Error::schema(src, line, e.to_string()));
                }
                RowPolicy::Skip => {
                    out.skipped_malformed += 1;
                    continue;
                }
            },
        }
        let parsed = (|| -> std::result::Result<CrimeRecord, String> {
            if raw.len() != 5 {
                return Err(format!("expected 5 fields, got {}", raw.len()));
            }
            Ok(CrimeRecord {
                year: field_num(&raw, 0, "year")?,
                easting: field_finite(&raw, 1, "easting")?,
                northing: field_finite(&raw, 2, "northing")?,
                category: field_str(&raw, 3, "category")?.to_owned(),
                district: field_opt_district(&raw, 4)?,
            })
        })();
        match parsed {
            Ok(rec) => {
                if allow.is_empty() || allow.iter().any(|a| a == &rec.category) {
                    out.records.push(rec);
                } else {
                    out.dropped_category += 1;
                }
            }
            Err(msg) => match policy {
                RowPolicy::Abort => return Err(Error::schema(src, record_line(&raw), msg)),
                RowPolicy::Skip => out.skipped_malformed += 1,
            },
        }
    }
    Ok(out)
}

/// Parses `row,col,district,habitable,walkable` rows. Strict: any malformed
/// row aborts with its line number. Flags must be literal `0` or `1`; an
/// empty district field means no district.
pub fn parse_cell_attrs_csv(input: impl Read, src: &str) -> Result<Vec<CellAttr>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    check_header(src, &headers, &["row", "col", "district", "habitable", "walkable"])?;

    let mut out = Vec::new();
    let mut raw = csv::ByteRecord::new();
    while rdr
        .read_byte_record(&mut raw)
        .map_err(|e| Error::schema(src, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?
    {
        let line = record_line(&raw);
        let attr = (|| -> std::result::Result<CellAttr, String> {
            if raw.len() != 5 {
                return Err(format!("expected 5 fields, got {}", raw.len()));
            }
            Ok(CellAttr {
                row: field_num(&raw, 0, "row")?,
                col: field_num(&raw, 1, "col")?,
                district: field_opt_district(&raw, 2)?,
                habitable: field_flag(&raw, 3, "habitable")?,
                walkable: field_flag(&raw, 4, "walkable")?,
            })
        })()
        .map_err(|msg| Error::schema(src, line, msg))?;
        out.push(attr);
    }
    Ok(out)
}

/// Parses `easting,northing,district` building points. Strict.
pub fn parse_buildings_csv(input: impl Read, src: &str) -> Result<Vec<BuildingPoint>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    check_header(src, &headers, &["easting", "northing", "district"])?;

    let mut out = Vec::new();
    let mut raw = csv::ByteRecord::new();
    while rdr
        .read_byte_record(&mut raw)
        .map_err(|e| Error::schema(src, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?
    {
        let line = record_line(&raw);
        let point = (|| -> std::result::Result<BuildingPoint, String> {
            if raw.len() != 3 {
                return Err(format!("expected 3 fields, got {}", raw.len()));
            }
            Ok(BuildingPoint {
                easting: field_finite(&raw, 0, "easting")?,
                northing: field_finite(&raw, 1, "northing")?,
                district: field_num(&raw, 2, "district")?,
            })
        })()
        .map_err(|msg| Error::schema(src, line, msg))?;
        out.push(point);
    }
    Ok(out)
}

/// Parses `id,name,population` district rows. Strict; duplicate ids are a
/// schema error.
pub fn parse_districts_csv(input: impl Read, src: &str) -> Result<Vec<DistrictInfo>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    check_header(src, &headers, &["id", "name", "population"])?;

    let mut out: Vec<DistrictInfo> = Vec::new();
    let mut seen = HashSet::new();
    let mut raw = csv::ByteRecord::new();
    while rdr
        .read_byte_record(&mut raw)
        .map_err(|e| Error::schema(src, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?
    {
        let line = record_line(&raw);
        let d = (|| -> std::result::Result<DistrictInfo, String> {
            if raw.len() != 3 {
                return Err(format!("expected 3 fields, got {}", raw.len()));
            }
            Ok(DistrictInfo {
                id: field_num(&raw, 0, "id")?,
                name: field_str(&raw, 1, "name")?.to_owned(),
                population: field_num(&raw, 2, "population")?,
            })
        })()
        .map_err(|msg| Error::schema(src, line, msg))?;
        if !seen.insert(d.id) {
            return Err(Error::schema(src, line, format!("duplicate district id {}", d.id)));
        }
        out.push(d);
    }
    Ok(out)
}

/// Parses `row,col` walkable-land rows. Strict.
pub fn parse_land_mask_csv(input: impl Read, src: &str) -> Result<Vec<(u32, u32)>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    check_header(src, &headers, &["row", "col"])?;

    let mut out = Vec::new();
    let mut raw = csv::ByteRecord::new();
    while rdr
        .read_byte_record(&mut raw)
        .map_err(|e| Error::schema(src, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?
    {
        let line = record_line(&raw);
        let rc = (|| -> std::result::Result<(u32, u32), String> {
            if raw.len() != 2 {
                return Err(format!("expected 2 fields, got {}", raw.len()));
            }
            Ok((field_num(&raw, 0, "row")?, field_num(&raw, 1, "col")?))
        })()
        .map_err(|msg| Error::schema(src, line, msg))?;
        out.push(rc);
    }
    Ok(out)
}

/// Writes a cell attribute table with the canonical header.
pub fn write_cell_attrs_csv(mut w: impl Write, attrs: &[CellAttr]) -> std::io::Result<()> {
    writeln!(w, "row,col,district,habitable,walkable")?;
    for a in attrs {
        let d = a.district.map(|d| d.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", a.row, a.col, d, a.habitable as u8, a.walkable as u8)?;
    }
    Ok(())
}

/// Writes a district table with the canonical header. Names containing
/// commas or quotes are quoted.
pub fn write_districts_csv(mut w: impl Write, districts: &[DistrictInfo]) -> std::io::Result<()> {
    writeln!(w, "id,name,population")?;
    for d in districts {
        let name = if d.name.contains(',') || d.name.contains('"') || d.name.contains('\n') {
            format!("\"{}\"", d.name.replace('"', "\"\""))
        } else {
            d.name.clone()
        };
        writeln!(w, "{},{},{}", d.id, name, d.population)?;
    }
    Ok(())
}

/// Writes crime records in the schema [`parse_crime_csv`] reads. Assumes
/// plain categories (no commas or quotes), which is all the generators
/// emit.
pub fn write_crime_csv(mut w: impl Write, records: &[CrimeRecord]) -> std::io::Result<()> {
    writeln!(w, "year,easting,northing,category,district")?;
    for r in records {
        let d = r.district.map(|d| d.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", r.year, r.easting, r.northing, r.category, d)?;
    }
    Ok(())
}

/// The cell containing a crime record, if any.
pub fn locate(record: &CrimeRecord, spec: &GridSpec) -> Option<(u32, u32)> {
    spec.locate_point(record.easting, record.northing)
}

/// Assembles the immutable environment from attribute rows and the district
/// table. Every cell absent from `attrs` gets the default attributes (no
/// district, not habitable, not walkable). Duplicate coordinates,
/// out-of-bounds coordinates, habitable-but-unwalkable rows and references
/// to unknown districts are rejected.
pub fn build_grid(spec: GridSpec, attrs: &[CellAttr], districts: Vec<DistrictInfo>) -> Result<Grid> {
    let mut districts = districts;
    districts.sort_by_key(|d| d.id);
    if districts.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::Config("duplicate district id in district table".into()));
    }
    let known: HashSet<DistrictId> = districts.iter().map(|d| d.id).collect();

    let mut cells: Vec<Cell> = (0..spec.n_cells())
        .map(|i| {
            let (row, col) = spec.coords(i);
            Cell {
                row,
                col,
                district: None,
                habitable: false,
                walkable: false,
                criminal_power: 0.0,
                crime_counter: 0,
            }
        })
        .collect();

    let mut filled = vec![false; spec.n_cells()];
    for a in attrs {
        if a.row as usize >= spec.n_rows || a.col as usize >= spec.n_cols {
            return Err(Error::Config(format!(
                "cell ({},{}) is outside the {}x{} grid",
                a.row, a.col, spec.n_rows, spec.n_cols
            )));
        }
        if a.habitable && !a.walkable {
            return Err(Error::Config(format!(
                "cell ({},{}) is habitable but not walkable",
                a.row, a.col
            )));
        }
        if let Some(d) = a.district {
            if !known.contains(&d) {
                return Err(Error::Config(format!(
                    "cell ({},{}) references unknown district {d}",
                    a.row, a.col
                )));
            }
        }
        let id = spec.index(a.row, a.col);
        if filled[id] {
            return Err(Error::Config(format!("duplicate cell attributes for ({},{})", a.row, a.col)));
        }
        filled[id] = true;
        let c = &mut cells[id];
        c.district = a.district;
        c.habitable = a.habitable;
        c.walkable = a.walkable;
    }

    Ok(Grid { spec, cells, districts })
}

/// Derives cell attributes from building points and a walkable-land mask.
///
/// A cell is habitable when at least one building falls in it; its district
/// is the most frequent district among those buildings, ties going to the
/// lowest id. A cell is walkable when it is habitable or listed in the mask.
/// Points and mask entries outside the grid are ignored. Rows come out in
/// row-major order, one per non-default cell.
pub fn derive_cell_attrs(
    buildings: &[BuildingPoint],
    land_mask: &[(u32, u32)],
    spec: &GridSpec,
) -> Vec<CellAttr> {
    let mut counts: BTreeMap<CellId, BTreeMap<DistrictId, u32>> = BTreeMap::new();
    for b in buildings {
        if let Some((row, col)) = spec.locate_point(b.easting, b.northing) {
            *counts.entry(spec.index(row, col)).or_default().entry(b.district).or_insert(0) += 1;
        }
    }
    let mut masked: HashSet<CellId> = HashSet::new();
    for &(row, col) in land_mask {
        if (row as usize) < spec.n_rows && (col as usize) < spec.n_cols {
            masked.insert(spec.index(row, col));
        }
    }

    let mut out = Vec::new();
    for id in 0..spec.n_cells() {
        let by_district = counts.get(&id);
        let habitable = by_district.is_some();
        let walkable = habitable || masked.contains(&id);
        if !walkable {
            continue;
        }
        // Ascending iteration plus a strict > keeps the lowest id on ties.
        let district = by_district.map(|m| {
            let mut best = (0u32, 0u32);
            let mut first = true;
            for (&d, &n) in m {
                if first || n > best.1 {
                    best = (d, n);
                    first = false;
                }
            }
            best.0
        });
        let (row, col) = spec.coords(id);
        out.push(CellAttr { row, col, district, habitable, walkable });
    }
    out
}

/// Per-cell yearly crime counts over a consecutive, inclusive year range.
#[derive(Debug, Clone, PartialEq)]
pub struct CellYearSeries {
    pub year_start: i32,
    pub year_end: i32,
    pub n_cells: usize,
    /// Flat `[cell * n_years + year_index]`.
    counts: Vec<u32>,
}

impl CellYearSeries {
    pub fn zeros(year_start: i32, year_end: i32, n_cells: usize) -> Result<Self> {
        if year_start > year_end {
            return Err(Error::Config(format!("empty year range {year_start}..={year_end}")));
        }
        let n_years = (year_end - year_start + 1) as usize;
        Ok(CellYearSeries { year_start, year_end, n_cells, counts: vec![0; n_cells * n_years] })
    }

    pub fn n_years(&self) -> usize {
        (self.year_end - self.year_start + 1) as usize
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.year_start..=self.year_end
    }

    pub fn count(&self, cell: CellId, year_index: usize) -> u32 {
        self.counts[cell * self.n_years() + year_index]
    }

    pub fn counts_for(&self, cell: CellId) -> &[u32] {
        let n = self.n_years();
        &self.counts[cell * n..(cell + 1) * n]
    }

    pub fn add(&mut self, cell: CellId, year: i32, n: u32) {
        debug_assert!(year >= self.year_start && year <= self.year_end);
        let t = (year - self.year_start) as usize;
        let idx = cell * self.n_years() + t;
        self.counts[idx] += n;
    }

    pub fn set(&mut self, cell: CellId, year: i32, n: u32) {
        let t = (year - self.year_start) as usize;
        let idx = cell * self.n_years() + t;
        self.counts[idx] = n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Counts of a single year as a dense per-cell vector.
    pub fn year_slice(&self, year: i32) -> Result<Vec<u32>> {
        if year < self.year_start || year > self.year_end {
            return Err(Error::Config(format!(
                "year {year} outside stored range {}..={}",
                self.year_start, self.year_end
            )));
        }
        let t = (year - self.year_start) as usize;
        Ok((0..self.n_cells).map(|c| self.count(c, t)).collect())
    }
}

/// Records dropped by [`aggregate_yearly`], by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub located: usize,
    pub unlocatable: usize,
    pub out_of_year_range: usize,
}

/// Bins records into per-cell yearly counts. Records outside the grid or
/// outside the year range are counted in the stats instead of stored.
pub fn aggregate_yearly(
    records: &[CrimeRecord],
    spec: &GridSpec,
    year_range: (i32, i32),
) -> Result<(CellYearSeries, AggregateStats)> {
    let mut series = CellYearSeries::zeros(year_range.0, year_range.1, spec.n_cells())?;
    let mut stats = AggregateStats::default();
    for r in records {
        if r.year < year_range.0 || r.year > year_range.1 {
            stats.out_of_year_range += 1;
            continue;
        }
        match locate(r, spec) {
            Some((row, col)) => {
                series.add(spec.index(row, col), r.year, 1);
                stats.located += 1;
            }
            None => stats.unlocatable += 1,
        }
    }
    Ok((series, stats))
}

/// Writes per-cell yearly counts as `row,col,<year>...`, one row per cell in
/// row-major order.
pub fn write_counts_by_year(mut w: impl Write, series: &CellYearSeries, spec: &GridSpec) -> std::io::Result<()> {
    debug_assert_eq!(series.n_cells, spec.n_cells());
    let years: Vec<String> = series.years().map(|y| y.to_string()).collect();
    writeln!(w, "row,col,{}", years.join(","))?;
    for id in 0..series.n_cells {
        let (row, col) = spec.coords(id);
        let vals: Vec<String> = series.counts_for(id).iter().map(|c| c.to_string()).collect();
        writeln!(w, "{},{},{}", row, col, vals.join(","))?;
    }
    Ok(())
}

/// Reads the table produced by [`write_counts_by_year`]. Years must be
/// consecutive and ascending; cells absent from the file stay zero;
/// duplicate cells are a schema error.
pub fn read_counts_by_year(input: impl Read, src: &str, spec: &GridSpec) -> Result<CellYearSeries> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers().map_err(|e| Error::schema(src, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().map(|f| f.trim()).collect();
    if cols.len() < 3 || cols[0] != "row" || cols[1] != "col" {
        return Err(Error::schema(src, 1, "expected header row,col,<year>,...".to_string()));
    }
    let mut years = Vec::new();
    for c in &cols[2..] {
        let y: i32 = c
            .parse()
            .map_err(|_| Error::schema(src, 1, format!("cannot parse year column {c:?}")))?;
        years.push(y);
    }
    for w in years.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::schema(src, 1, "year columns must be consecutive and ascending".to_string()));
        }
    }
    let (y0, y1) = (years[0], years[years.len() - 1]);
    let mut series = CellYearSeries::zeros(y0, y1, spec.n_cells())?;
    let mut filled = vec![false; spec.n_cells()];

    let mut raw = csv::ByteRecord::new();
    while rdr
        .read_byte_record(&mut raw)
        .map_err(|e| Error::schema(src, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?
    {
        let line = record_line(&raw);
        if raw.len() != 2 + years.len() {
            return Err(Error::schema(src, line, format!("expected {} fields, got {}", 2 + years.len(), raw.len())));
        }
        let (row, col): (u32, u32) = (
            field_num(&raw, 0, "row").map_err(|m| Error::schema(src, line, m))?,
            field_num(&raw, 1, "col").map_err(|m| Error::schema(src, line, m))?,
        );
        if row as usize >= spec.n_rows || col as usize >= spec.n_cols {
            return Err(Error::schema(src, line, format!("cell ({row},{col}) is outside the grid")));
        }
        let id = spec.index(row, col);
        if filled[id] {
            return Err(Error::schema(src, line, format!("duplicate cell ({row},{col})")));
        }
        filled[id] = true;
        for (k, y) in years.iter().enumerate() {
            let n: u32 = field_num(&raw, 2 + k, "count").map_err(|m| Error::schema(src, line, m))?;
            series.set(id, *y, n);
        }
    }
    Ok(series)
}
