//! File formats, pipeline stages and the experiment runner around
//! `tracelab-core`.

pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod manifest;
pub mod runner;
pub mod stages;
pub mod taxonomy;
pub mod viz;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{LabError, Result};
