//! Configuration, experiments and reports behind the command line tool.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, ExperimentId};
pub use experiments::{pack, run_experiment, solve};
pub use report::{read_report, tally, write_report, ReportRow, Tolerance};
