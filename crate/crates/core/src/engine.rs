//! The yearly simulation: citizens move through three daily slots, police
//! patrol on shifts, and crimes happen cell by cell.
//!
//! A run is logically sequential; every random decision comes from one
//! ChaCha8 stream seeded by `SimParams::seed`, in a fixed order:
//!
//! 1. At setup: five draws per citizen (district, home cell, work cell,
//!    role, employment), then one draw per police unit (initial post,
//!    uniform over walkable cells).
//! 2. On each refresh day (`day % power_refresh_days == 0`, before the morning
//!    slot): one alpha draw per cell in row-major order, then whatever the
//!    patrol strategy draws.
//! 3. In every slot, in citizen index order: one employment draw iff the
//!    slot is the citizen's work slot, then the leisure draws (scope, and a
//!    destination index when the scope has candidates).
//! 4. Then one crime draw per citizen, again in index order.
//!
//! Identical (grid, trends, params, strategy) therefore give bit-identical
//! results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crimestats::{compute_criminal_power, redraw_alpha, CellTrend};
use crate::error::{Error, Result};
use crate::geodata::{CellId, DistrictId, Grid};
use crate::population::{
    employment_step, planned_action, spawn_citizens, Action, Citizen, LeisurePlanner, RoleMix,
    Slot,
};

pub const DAYS_PER_YEAR: u32 = 365;
pub const SLOTS_PER_YEAR: usize = DAYS_PER_YEAR as usize * 3;

/// Which deterrence curve drives epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterrenceModel {
    /// Default: a cell without a unit ramps from 1+psi (never visited in the
    /// window) down to 1-rho (visited every day); a cell with a unit present
    /// sits at 1-rho.
    VisitRamp,
    /// Compatibility variant: the ramp applies while a unit is present and
    /// absence pins at 1-rho.
    FlatAbsence,
}

/// Global model parameters. Defaults follow the Málaga experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub total_population: u64,
    pub n_citizens: usize,
    pub n_police_units: usize,
    pub find_job_probability: f64,
    pub lose_job_probability: f64,
    pub nearby_leisure_probability: f64,
    pub downtown_leisure_probability: f64,
    /// Per-(agent, slot) offending rate scale.
    pub offense_rate: f64,
    /// Mu: fractional crime increase for unemployed citizens.
    pub unemployment_crime_increase: f64,
    /// Rho: fractional crime reduction where a unit is present.
    pub police_reduction: f64,
    /// Psi: fractional crime increase where police have not been seen for a
    /// full window.
    pub no_police_increase: f64,
    pub unemployment_rate: f64,
    pub role_mix: RoleMix,
    /// Leisure reach in cells (Euclidean, center to center).
    pub leisure_radius: f64,
    pub downtown_districts: Vec<DistrictId>,
    /// Alpha redraw / police redistribution cadence in days.
    pub power_refresh_days: u32,
    /// Police memory window in days.
    pub police_window_days: u32,
    pub deterrence_model: DeterrenceModel,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            total_population: 572_260,
            n_citizens: 1000,
            n_police_units: 0,
            find_job_probability: 0.005,
            lose_job_probability: 0.0022,
            nearby_leisure_probability: 0.50,
            downtown_leisure_probability: 0.075,
            offense_rate: 5.39e-8,
            unemployment_crime_increase: 0.10,
            police_reduction: 0.3,
            no_police_increase: 0.2,
            unemployment_rate: 0.3086,
            role_mix: RoleMix::default(),
            leisure_radius: 5.0,
            downtown_districts: vec![1],
            power_refresh_days: 14,
            police_window_days: 30,
            deterrence_model: DeterrenceModel::VisitRamp,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("find_job_probability", self.find_job_probability),
            ("lose_job_probability", self.lose_job_probability),
            ("nearby_leisure_probability", self.nearby_leisure_probability),
            ("downtown_leisure_probability", self.downtown_leisure_probability),
            ("unemployment_crime_increase", self.unemployment_crime_increase),
            ("police_reduction", self.police_reduction),
            ("no_police_increase", self.no_police_increase),
            ("unemployment_rate", self.unemployment_rate),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.unemployment_rate >= 1.0 {
            return Err(Error::Config("unemployment_rate must be below 1".into()));
        }
        if self.nearby_leisure_probability + self.downtown_leisure_probability > 1.0 + 1e-12 {
            return Err(Error::Config(
                "nearby_leisure_probability + downtown_leisure_probability must not exceed 1".into(),
            ));
        }
        if !(self.offense_rate.is_finite() && self.offense_rate >= 0.0) {
            return Err(Error::Config(format!("offense_rate must be nonnegative, got {}", self.offense_rate)));
        }
        if !(self.leisure_radius.is_finite() && self.leisure_radius >= 0.0) {
            return Err(Error::Config(format!("leisure_radius must be nonnegative, got {}", self.leisure_radius)));
        }
        if self.n_citizens > 0 && self.total_population == 0 {
            return Err(Error::Config("total_population must be positive when citizens are spawned".into()));
        }
        if self.power_refresh_days == 0 {
            return Err(Error::Config("power_refresh_days must be at least 1".into()));
        }
        if self.police_window_days == 0 {
            return Err(Error::Config("police_window_days must be at least 1".into()));
        }
        self.role_mix.validate()?;
        let (_, r_e) = offense_rates(self);
        if r_e < 0.0 {
            return Err(Error::Config(format!(
                "employed offense rate is negative: unemployment_crime_increase {} is too large for unemployment_rate {}",
                self.unemployment_crime_increase, self.unemployment_rate
            )));
        }
        Ok(())
    }

    /// How many real inhabitants one citizen agent stands for.
    pub fn citizen_ratio(&self) -> f64 {
        self.total_population as f64 / self.n_citizens.max(1) as f64
    }
}

/// Offending rates `(r_u, r_e)` for unemployed and employed citizens.
///
/// The split is mean preserving: `U*r_u + (1-U)*r_e = r` exactly, with the
/// unemployed rate lifted by `1 + mu`.
pub fn offense_rates(params: &SimParams) -> (f64, f64) {
    let r = params.offense_rate;
    let mu = params.unemployment_crime_increase;
    let u = params.unemployment_rate;
    let r_u = r * (1.0 + mu);
    let r_e = r * (1.0 - mu * u / (1.0 - u));
    (r_u, r_e)
}

/// One patrol unit. `current_cell` is set by [`deploy_police`] each slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoliceUnit {
    pub shift: Slot,
    pub work_cell: CellId,
    pub current_cell: Option<CellId>,
}

/// Per-cell record of recent police presence.
///
/// For each cell it keeps a bitmask of the last `window` finalized days
/// (bit k set = a unit was present k+1 days ago, any slot), a flag for the
/// running day, and the current-slot presence. A day's flag is folded into
/// the running-day flag at the end of each slot and finalized at the end of
/// the day.
#[derive(Debug, Clone, PartialEq)]
pub struct PoliceLedger {
    window: u32,
    history: Vec<u32>,
    today: Vec<bool>,
    present_now: Vec<bool>,
}

impl PoliceLedger {
    pub fn new(n_cells: usize, window: u32) -> Self {
        assert!(window >= 1 && window <= 32, "window must lie in 1..=32 days");
        PoliceLedger {
            window,
            history: vec![0; n_cells],
            today: vec![false; n_cells],
            present_now: vec![false; n_cells],
        }
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Marks the cells occupied by deployed units this slot, clearing the
    /// previous slot's marks.
    pub fn begin_slot(&mut self, occupied: impl Iterator<Item = CellId>) {
        self.present_now.fill(false);
        for cell in occupied {
            self.present_now[cell] = true;
        }
    }

    /// Folds the current slot into the running day.
    pub fn end_slot(&mut self) {
        for (t, &now) in self.today.iter_mut().zip(&self.present_now) {
            *t |= now;
        }
    }

    /// Closes the running day: shifts it into the history window. Also
    /// drops the last slot's presence marks so nothing from the closed day
    /// leaks into the next one before `begin_slot` runs.
    pub fn finalize_day(&mut self) {
        let mask = if self.window == 32 { u32::MAX } else { (1u32 << self.window) - 1 };
        for (h, t) in self.history.iter_mut().zip(self.today.iter_mut()) {
            *h = ((*h << 1) | *t as u32) & mask;
            *t = false;
        }
        self.present_now.fill(false);
    }

    /// Is a unit in the cell right now?
    pub fn present_now(&self, cell: CellId) -> bool {
        self.present_now[cell]
    }

    /// Days with police presence among the trailing window: finalized days
    /// plus the running day (today's earlier slots or the current one),
    /// capped at the window length.
    pub fn visits_in_window(&self, cell: CellId) -> u32 {
        let today = (self.today[cell] || self.present_now[cell]) as u32;
        (self.history[cell].count_ones() + today).min(self.window)
    }
}

/// Deterrence factor for a cell in the current slot.
///
/// With no police configured the factor is 1 regardless of model. Otherwise
/// the default ramp gives presence 1-rho, and absence a linear walk from
/// 1+psi (never visited within the window) down to 1-rho (visited every
/// day), so range `[1-rho, 1+psi]` with continuity at a full window.
pub fn epsilon(cell: CellId, ledger: &PoliceLedger, params: &SimParams) -> f64 {
    if params.n_police_units == 0 {
        return 1.0;
    }
    let rho = params.police_reduction;
    let psi = params.no_police_increase;
    let frac = ledger.visits_in_window(cell) as f64 / ledger.window() as f64;
    match params.deterrence_model {
        DeterrenceModel::VisitRamp => {
            if ledger.present_now(cell) {
                1.0 - rho
            } else {
                1.0 + psi - frac * (psi + rho)
            }
        }
        DeterrenceModel::FlatAbsence => {
            if ledger.present_now(cell) {
                1.0 - frac * (psi + rho) - rho
            } else {
                1.0 - rho
            }
        }
    }
}

/// Probability that one citizen offends in its current cell this slot.
/// `z` counts the citizens in the cell including the actor, so `z >= 1`.
pub fn crime_probability(
    unemployed: bool,
    power: f64,
    z: u32,
    epsilon_value: f64,
    r_u: f64,
    r_e: f64,
    r_c: f64,
) -> f64 {
    debug_assert!(z >= 1, "occupancy must include the acting citizen");
    debug_assert!(power >= 0.0);
    let rate = if unemployed { r_u } else { r_e };
    (power * r_c * epsilon_value * rate / z as f64).clamp(0.0, 1.0)
}

/// Sets `current_cell` on every unit: the work cell during the unit's
/// shift, none otherwise.
pub fn deploy_police(units: &mut [PoliceUnit], slot: Slot) {
    for u in units {
        u.current_cell = if u.shift == slot { Some(u.work_cell) } else { None };
    }
}

/// Citizens-per-cell counts for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    counts: Vec<u32>,
    total: u32,
}

impl OccupancyMap {
    pub fn count(&self, cell: CellId) -> u32 {
        self.counts[cell]
    }

    pub fn total(&self) -> u32 {
        self.total
    }
}

/// Tallies settled citizen positions into per-cell counts.
pub fn build_occupancy(positions: &[CellId], n_cells: usize) -> OccupancyMap {
    let mut counts = vec![0u32; n_cells];
    for &p in positions {
        counts[p] += 1;
    }
    OccupancyMap { counts, total: positions.len() as u32 }
}

/// A patrol assignment policy: rewrites unit work cells at every refresh.
pub trait PatrolStrategy: Send + Sync {
    fn name(&self) -> &str;

    /// `world` is the engine's working grid, whose cells carry the current
    /// criminal power.
    fn assign(&self, world: &Grid, ledger: &PoliceLedger, units: &mut [PoliceUnit], rng: &mut ChaCha8Rng);
}

/// Keeps every unit at its initial post.
pub struct StaticPatrol;

impl PatrolStrategy for StaticPatrol {
    fn name(&self) -> &str {
        "static"
    }

    fn assign(&self, _world: &Grid, _ledger: &PoliceLedger, _units: &mut [PoliceUnit], _rng: &mut ChaCha8Rng) {}
}

/// Posts every unit to an independent uniform draw over walkable cells.
pub struct RandomPatrol;

impl PatrolStrategy for RandomPatrol {
    fn name(&self) -> &str {
        "random"
    }

    fn assign(&self, world: &Grid, _ledger: &PoliceLedger, units: &mut [PoliceUnit], rng: &mut ChaCha8Rng) {
        let walkable = world.walkable_ids();
        if walkable.is_empty() {
            return;
        }
        for u in units {
            u.work_cell = walkable[rng.random_range(0..walkable.len())];
        }
    }
}

/// Posts unit k to the k-th highest-power walkable cell (ties broken in
/// row-major order). With more units than walkable cells the ranking wraps.
pub struct TopPowerPatrol;

impl PatrolStrategy for TopPowerPatrol {
    fn name(&self) -> &str {
        "top_power"
    }

    fn assign(&self, world: &Grid, _ledger: &PoliceLedger, units: &mut [PoliceUnit], _rng: &mut ChaCha8Rng) {
        let mut ranked = world.walkable_ids();
        if ranked.is_empty() {
            return;
        }
        ranked.sort_by(|&a, &b| {
            world.cells[b]
                .criminal_power
                .total_cmp(&world.cells[a].criminal_power)
                .then(a.cmp(&b))
        });
        for (k, u) in units.iter_mut().enumerate() {
            u.work_cell = ranked[k % ranked.len()];
        }
    }
}

/// Looks up a built-in strategy by name.
pub fn builtin_strategy(name: &str) -> Result<Box<dyn PatrolStrategy>> {
    match name {
        "static" => Ok(Box::new(StaticPatrol)),
        "random" => Ok(Box::new(RandomPatrol)),
        "top_power" => Ok(Box::new(TopPowerPatrol)),
        other => Err(Error::Config(format!(
            "unknown patrol strategy {other:?}, expected static, random or top_power"
        ))),
    }
}

/// Day and slot of the running simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    pub day: u32,
    pub slot: Slot,
}

impl SimClock {
    pub fn start() -> Self {
        SimClock { day: 0, slot: Slot::Morning }
    }

    pub fn next(self) -> Self {
        match self.slot {
            Slot::Morning => SimClock { day: self.day, slot: Slot::Afternoon },
            Slot::Afternoon => SimClock { day: self.day, slot: Slot::Night },
            Slot::Night => SimClock { day: self.day + 1, slot: Slot::Morning },
        }
    }
}

/// One recorded offense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrimeEvent {
    pub day: u32,
    pub slot: Slot,
    pub row: u32,
    pub col: u32,
    pub district: Option<DistrictId>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub seed: u64,
    pub params: SimParams,
    /// Crimes per cell, row-major.
    pub cell_counts: Vec<u32>,
    /// Crimes per district, ascending id; the trailing entry with district
    /// `None` collects cells outside every district.
    pub district_counts: Vec<(Option<DistrictId>, u64)>,
    /// Crimes per (day, slot), indexed `day * 3 + slot`.
    pub slot_totals: Vec<u32>,
    /// Unemployed share at the end of each day (0 when no citizens exist).
    pub unemployment: Vec<f64>,
    pub events: Vec<CrimeEvent>,
    /// Criminal power field as of the last refresh.
    pub final_powers: Vec<f64>,
}

impl SimResult {
    pub fn total_crimes(&self) -> u64 {
        self.events.len() as u64
    }
}

/// A running simulation. Construct with [`Simulation::new`] (which spawns
/// the population) or [`Simulation::with_population`] (tests and rigs), then
/// drive it with [`Simulation::step_slot`] or [`Simulation::run`].
pub struct Simulation {
    params: SimParams,
    trends: Vec<CellTrend>,
    /// Working copy of the environment; carries power and crime counters.
    world: Grid,
    rng: ChaCha8Rng,
    citizens: Vec<Citizen>,
    units: Vec<PoliceUnit>,
    ledger: PoliceLedger,
    planner: LeisurePlanner,
    positions: Vec<CellId>,
    clock: SimClock,
    slot_totals: Vec<u32>,
    unemployment: Vec<f64>,
    events: Vec<CrimeEvent>,
    refreshes: u32,
}

impl Simulation {
    /// Spawns citizens and police from the seed and sets the clock to day 0,
    /// morning. The power field is computed on the first step.
    pub fn new(grid: &Grid, trends: &[CellTrend], params: SimParams) -> Result<Self> {
        params.validate()?;
        if trends.len() != grid.n_cells() {
            return Err(Error::Engine(format!(
                "{} trends for {} cells",
                trends.len(),
                grid.n_cells()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let citizens = if params.n_citizens == 0 {
            Vec::new()
        } else {
            spawn_citizens(params.n_citizens, grid, params.role_mix, params.unemployment_rate, &mut rng)?
        };
        let mut units = Vec::with_capacity(params.n_police_units);
        if params.n_police_units > 0 {
            let walkable = grid.walkable_ids();
            if walkable.is_empty() {
                return Err(Error::Engine("police configured but no cell is walkable".into()));
            }
            for k in 0..params.n_police_units {
                let shift = Slot::ALL[k % 3];
                let work_cell = walkable[rng.random_range(0..walkable.len())];
                units.push(PoliceUnit { shift, work_cell, current_cell: None });
            }
        }
        Self::assemble(grid, trends, params, rng, citizens, units)
    }

    /// Builds a simulation around a hand-made population. No setup draws are
    /// consumed; the RNG starts fresh at the seed.
    pub fn with_population(
        grid: &Grid,
        trends: &[CellTrend],
        params: SimParams,
        citizens: Vec<Citizen>,
        units: Vec<PoliceUnit>,
    ) -> Result<Self> {
        params.validate()?;
        if trends.len() != grid.n_cells() {
            return Err(Error::Engine(format!("{} trends for {} cells", trends.len(), grid.n_cells())));
        }
        let n = grid.n_cells();
        for c in &citizens {
            if c.home_cell >= n || c.work_cell >= n {
                return Err(Error::Engine("citizen placed outside the grid".into()));
            }
        }
        for u in &units {
            if u.work_cell >= n {
                return Err(Error::Engine("police unit posted outside the grid".into()));
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Self::assemble(grid, trends, params, rng, citizens, units)
    }

    fn assemble(
        grid: &Grid,
        trends: &[CellTrend],
        params: SimParams,
        rng: ChaCha8Rng,
        citizens: Vec<Citizen>,
        units: Vec<PoliceUnit>,
    ) -> Result<Self> {
        let planner = LeisurePlanner::new(
            grid,
            params.nearby_leisure_probability,
            params.downtown_leisure_probability,
            params.leisure_radius,
            &params.downtown_districts,
        );
        let positions = citizens.iter().map(|c| c.home_cell).collect();
        Ok(Simulation {
            ledger: PoliceLedger::new(grid.n_cells(), params.police_window_days),
            planner,
            world: grid.clone(),
            trends: trends.to_vec(),
            rng,
            citizens,
            units,
            positions,
            clock: SimClock::start(),
            slot_totals: Vec::new(),
            unemployment: Vec::new(),
            events: Vec::new(),
            refreshes: 0,
            params,
        })
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn world(&self) -> &Grid {
        &self.world
    }

    pub fn citizens(&self) -> &[Citizen] {
        &self.citizens
    }

    pub fn units(&self) -> &[PoliceUnit] {
        &self.units
    }

    pub fn ledger(&self) -> &PoliceLedger {
        &self.ledger
    }

    /// Where each citizen settled in the last completed slot.
    pub fn positions(&self) -> &[CellId] {
        &self.positions
    }

    pub fn events(&self) -> &[CrimeEvent] {
        &self.events
    }

    pub fn refreshes(&self) -> u32 {
        self.refreshes
    }

    /// Advances one slot. On refresh mornings the alpha field is redrawn,
    /// powers recomputed and the patrol strategy re-posts the units first.
    pub fn step_slot(&mut self, strategy: &dyn PatrolStrategy) -> Result<()> {
        let SimClock { day, slot } = self.clock;
        debug_assert!(day < DAYS_PER_YEAR, "stepping past the simulated year");

        if slot == Slot::Morning && day % self.params.power_refresh_days == 0 {
            let alpha = redraw_alpha(self.world.n_cells(), &mut self.rng);
            let powers = compute_criminal_power(&self.trends, &alpha)?;
            for (cell, p) in self.world.cells.iter_mut().zip(&powers) {
                cell.criminal_power = *p;
            }
            strategy.assign(&self.world, &self.ledger, &mut self.units, &mut self.rng);
            self.refreshes += 1;
        }

        deploy_police(&mut self.units, slot);
        self.ledger.begin_slot(self.units.iter().filter_map(|u| u.current_cell));

        for i in 0..self.citizens.len() {
            let c = self.citizens[i];
            let action = planned_action(c.role, slot, c.unemployed);
            if slot == c.role.work_slot() {
                employment_step(
                    &mut self.citizens[i],
                    self.params.find_job_probability,
                    self.params.lose_job_probability,
                    &mut self.rng,
                );
            }
            self.positions[i] = match action {
                Action::Work => c.work_cell,
                Action::SeekJob | Action::Rest => c.home_cell,
                Action::Leisure => self.planner.destination(c.home_cell, &mut self.rng),
            };
        }

        let occupancy = build_occupancy(&self.positions, self.world.n_cells());
        debug_assert_eq!(occupancy.total() as usize, self.citizens.len());

        let (r_u, r_e) = offense_rates(&self.params);
        let r_c = self.params.citizen_ratio();
        for i in 0..self.citizens.len() {
            let cell = self.positions[i];
            let p = crime_probability(
                self.citizens[i].unemployed,
                self.world.cells[cell].criminal_power,
                occupancy.count(cell),
                epsilon(cell, &self.ledger, &self.params),
                r_u,
                r_e,
                r_c,
            );
            if self.rng.random::<f64>() < p {
                self.record_crime(day, slot, cell);
            }
        }

        self.ledger.end_slot();
        if slot == Slot::Night {
            self.ledger.finalize_day();
            let share = if self.citizens.is_empty() {
                0.0
            } else {
                self.citizens.iter().filter(|c| c.unemployed).count() as f64 / self.citizens.len() as f64
            };
            self.unemployment.push(share);
        }
        self.clock = self.clock.next();
        Ok(())
    }

    fn record_crime(&mut self, day: u32, slot: Slot, cell: CellId) {
        let c = &mut self.world.cells[cell];
        c.crime_counter += 1;
        let (row, col, district) = (c.row, c.col, c.district);
        while self.slot_totals.len() <= day as usize * 3 + slot.index() {
            self.slot_totals.push(0);
        }
        self.slot_totals[day as usize * 3 + slot.index()] += 1;
        self.events.push(CrimeEvent { day, slot, row, col, district });
    }

    /// Runs the remaining slots of the year and reports.
    pub fn run(mut self, strategy: &dyn PatrolStrategy) -> Result<SimResult> {
        while self.clock.day < DAYS_PER_YEAR {
            self.step_slot(strategy)?;
        }
        Ok(self.finish())
    }

    /// Snapshots the results accumulated so far.
    pub fn finish(mut self) -> SimResult {
        let completed_slots = self.clock.day as usize * 3 + self.clock.slot.index();
        self.slot_totals.resize(completed_slots, 0);

        let mut per: std::collections::BTreeMap<DistrictId, u64> =
            self.world.districts.iter().map(|d| (d.id, 0)).collect();
        let mut none_bucket = 0u64;
        for cell in &self.world.cells {
            if cell.crime_counter == 0 {
                continue;
            }
            match cell.district {
                Some(d) => *per.entry(d).or_insert(0) += cell.crime_counter as u64,
                None => none_bucket += cell.crime_counter as u64,
            }
        }
        let mut district_counts: Vec<(Option<DistrictId>, u64)> =
            per.into_iter().map(|(d, n)| (Some(d), n)).collect();
        district_counts.push((None, none_bucket));

        SimResult {
            seed: self.params.seed,
            cell_counts: self.world.cells.iter().map(|c| c.crime_counter).collect(),
            district_counts,
            slot_totals: self.slot_totals,
            unemployment: self.unemployment,
            events: self.events,
            final_powers: self.world.cells.iter().map(|c| c.criminal_power).collect(),
            params: self.params,
        }
    }
}

/// Builds and runs one full year.
pub fn run_year(
    grid: &Grid,
    trends: &[CellTrend],
    params: SimParams,
    strategy: &dyn PatrolStrategy,
) -> Result<SimResult> {
    Simulation::new(grid, trends, params)?.run(strategy)
}
