//! Configuration, fixture ingestion, reports and the command-line interface.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod golden;
pub mod pipeline;
pub mod report;

pub use config::{load_config, ScenarioConfig};
pub use pipeline::{load_model, LoadedModel, ScenarioRun};
