//! Experiment runner: parses a config, runs the plain and antithetic arms
//! for each domain size, and writes CSV/JSON results.

pub mod config;
pub mod runner;

pub use config::{parse_config, parse_str, ConfigError, ExperimentConfig, TestCase};
pub use runner::{emit_plot_data, run_experiment, run_sizes, write_results, ExperimentResults, RunError};
