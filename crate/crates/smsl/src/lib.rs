//! File formats, experiment configuration and the command-line driver for
//! [`smsl_core`].

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{cmd_compare, cmd_ensemble, cmd_eval, cmd_gen_data, cmd_train, Overrides};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
