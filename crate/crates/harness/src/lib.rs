//! Experiment driver for the `nsbwk` command-line tool.
//!
//! Configs are TOML; outputs are long-format CSV, a summary CSV and SVG charts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod lowerbound;
pub mod oco;
pub mod output;
pub mod svg;

pub use config::{ExperimentConfig, InstanceSpec, OutputFormat, PolicyKind, PolicySpec};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, AggregateTable, CellResult, CellStatus};
pub use output::{emit_outputs, read_long_csv, write_long_csv};
