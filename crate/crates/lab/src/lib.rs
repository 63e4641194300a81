//! Reproducible experiments on top of `wavepacket-core`.
//!
//! A run is described by an [`ExperimentConfig`] (TOML plus `--set`
//! overrides), executed by [`run`] and written out as a [`ReportBundle`]:
//! long-format CSV tables, a JSON summary and a gnuplot script.

pub mod catalog;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use catalog::{CatalogEntry, catalog};
pub use config::{ExperimentConfig, ExperimentName};
pub use error::LabError;
pub use report::{Bound, Check, Report, ReportBundle, Table};

/// Runs one experiment in memory.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    cfg.validate()?;
    let name = cfg.experiment;
    experiments::dispatch(cfg).map_err(|e| e.in_experiment(name))
}
