//! Simulation lab for disturbance-observer based robust position control of
//! planar two- and three-link manipulators.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod par;
pub mod simulation;

pub use error::{Error, Result};
