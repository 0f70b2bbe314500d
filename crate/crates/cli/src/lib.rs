//! Configuration and stage orchestration for the `nslift` binary.

pub mod config;
pub mod pipeline;

pub use config::RunConfig;
pub use pipeline::{Manifest, Pipeline, PipelineError, Stage};
