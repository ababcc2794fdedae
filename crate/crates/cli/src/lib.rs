//! Command-line pipeline over the fuelrec engine: configuration, artifact
//! layout and the commands `synth`, `ingest`, `detect`, `train`, `explain`,
//! `recommend`, `evaluate` and `run-all`.

pub mod config;
pub mod error;
pub mod stages;
pub mod workspace;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use stages::{detect, evaluate, explain, ingest, recommend, run_all, synth, train, Evaluation};
