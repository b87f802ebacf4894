//! Agent-based simulator of urban crime on a gridded city.
//!
//! The crate is organized as a pipeline:
//!
//! * [`geodata`] ingests raw CSV inputs (crime records, building points,
//!   district tables) and rasterizes them onto a rectangular grid of cells.
//! * [`crimestats`] fits per-cell yearly trends and turns them into the
//!   criminal power field that drives offending behaviour.
//! * [`population`] spawns citizen agents and decides what each one does in
//!   every time slot.
//! * [`engine`] advances the world day by day: citizens move, police patrol,
//!   crimes happen.
//! * [`metrics`] scores simulated counts against observed ones (PAI, PEI,
//!   FAI, hotspot precision/recall, rank and location tests).
//! * [`calibration`] sweeps behavioural parameters over replicated runs and
//!   ranks the candidates.
//! * [`synthcity`] generates fully synthetic cities with known ground truth
//!   for end-to-end validation.
//! * [`cli`] wires everything into the `crimesim` command-line tool.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod crimestats;
pub mod engine;
pub mod error;
pub mod geodata;
pub mod io;
pub mod metrics;
pub mod population;
pub mod synthcity;

pub use error::{Error, Result};
