use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] tracelab_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("manifest {} entry {index} ({file}): {source}", manifest.display())]
    Entry { manifest: PathBuf, index: usize, file: String, source: Box<LabError> },
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<LabError> },
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        LabError::Format { path: path.into(), message: message.to_string() }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        LabError::Stage { stage: stage.to_string(), source: Box::new(self) }
    }

    /// Short machine-readable class of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Core(tracelab_core::Error::Config(_)) => "config",
            LabError::Core(tracelab_core::Error::Shape(_)) => "shape",
            LabError::Core(tracelab_core::Error::Numeric(_)) => "numeric",
            LabError::Core(tracelab_core::Error::AtIndex { .. }) => "core",
            LabError::Io { .. } => "io",
            LabError::Image { .. } => "image",
            LabError::Format { .. } => "format",
            LabError::Parse { .. } => "parse",
            LabError::Config(_) => "config",
            LabError::Entry { source, .. } | LabError::Stage { source, .. } => source.kind(),
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let stage = match self {
            LabError::Stage { stage, .. } => Some(stage.clone()),
            _ => None,
        };
        ErrorRecord { error: self.kind(), stage, message: self.to_string() }
    }
}

/// What a failed command writes to stderr and to `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub message: String,
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::LabError::Config(format!($($arg)*)) };
}
pub(crate) use config_err;
