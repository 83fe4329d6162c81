//! Experiment runner for the ZA-LMS transient model: configuration, CSV
//! output and the lemma verification command.

pub mod config;
pub mod error;
pub mod experiment;
pub mod verify;

pub use config::{load_config, ExperimentConfig};
pub use error::CliError;
pub use experiment::{run_experiment, Manifest, RunOptions};
pub use verify::{verify_lemmas, VerifyOptions};
