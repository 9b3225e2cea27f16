//! Hourly mobile traffic and control-plane forecasts for a dense urban area.
//!
//! The pipeline runs from device diffusion curves and urban density profiles
//! through per-application volume models to hourly demand, peak-hour control
//! indicators and capacity crossing years.

pub mod capacity_timing;
pub mod cli_io;
pub mod common;
pub mod control_needs;
pub mod diffusion;
pub mod forecast_engine;
pub mod profile;
pub mod urban_density;
pub mod volume_models;

pub use common::{Estimate, Variants, YearRange};
pub use profile::{HourlyProfile, ProfileUnit, HOURS};
