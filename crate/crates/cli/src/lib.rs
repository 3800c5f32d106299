//! Library side of the `vocadapt` command-line tool: pipeline
//! configuration and orchestration, exit-code mapping and the toy data
//! generator.

pub mod config;
pub mod error;
pub mod files;
pub mod pipeline;
pub mod toy;

pub use config::{CbowSettings, PipelineConfig, ProjectionSettings, SideConfig};
pub use error::CliError;
pub use pipeline::{run_pipeline, RunManifest};
