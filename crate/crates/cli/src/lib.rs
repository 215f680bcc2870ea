//! Configuration, stage orchestration and run manifests for the
//! `reviewlens` command-line pipeline.

pub mod config;
pub mod labels;
pub mod manifest;
pub mod pipeline;
mod stages;

pub use config::{ConfigError, PipelineConfig};
pub use manifest::{RunManifest, StageRecord, StageStatus};
pub use pipeline::{run_pipeline, Pipeline, PipelineError, Stage};
