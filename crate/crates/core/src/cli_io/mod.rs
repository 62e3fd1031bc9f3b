//! Configuration, file formats and the end-to-end experiment driver.

pub mod config;
pub mod csv;
pub mod experiment;

pub use config::{load_config, parse_config, render_config, ExperimentConfig};
pub use experiment::{resolve_output_dir, run_experiment, ExperimentReport};
