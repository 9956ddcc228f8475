//! Config-driven experiment pipelines around `mia-core`: population
//! generation, challenger and shadow training, attack scoring and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::Config;
pub use error::CliError;
