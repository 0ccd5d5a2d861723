//! Experiment configuration, batch runs and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod units;

pub use config::{load_config, parse_config, AntennaCount, ExperimentConfig, ScenarioConfig};
pub use report::{summarize, GroupStats, OrderingCheck, SignTest, Summary};
pub use run::{grid, load_policy, read_curve, run_all, run_batch, run_one, write_curve, BatchOutcome, RunResult, RunSpec};
