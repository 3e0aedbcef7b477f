//! Experiment driver for `nuh-core`.
//!
//! `nuh-lab <experiment> --config <file.json>` resolves a strict JSON
//! config ([`config`]), runs one pipeline ([`run_experiment`]) and writes
//! `summary.json` plus CSV files into a fresh timestamped directory
//! ([`output`]). Exit status is 0 when every hard invariant passed, 1 on
//! an invariant or numerical failure and 2 on usage errors.

pub mod config;
pub mod error;
mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use experiments::run_experiment;
pub use output::{emit_plot_data, plot_csv, Invariant, RunOutput};
