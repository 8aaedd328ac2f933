//! Configuration, experiment presets and result files for the `acbpc`
//! command line tool.

pub mod app;
pub mod config;
pub mod output;
pub mod preset;

pub use config::{load_config, ConfigError, Loaded};
pub use preset::ExperimentPreset;
