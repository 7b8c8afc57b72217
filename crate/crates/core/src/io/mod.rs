//! File formats: ASCII PLY geometry, label sidecars, and the JSON documents
//! for configuration, registration results, ground truth, scenes and metrics.

mod config;
mod labels;
mod metrics;
mod ply;
mod result;
mod scene;
mod truth;

pub use config::{ConfigFile, IcpSection, PipelineSection, RansacSection};
pub use labels::{read_labels, write_labels};
pub use metrics::{write_metrics, MetricsFile, PartMetrics};
pub use ply::{read_ply, write_ply};
pub use result::{read_result, write_result, PartResult, ResultFile, TransformDto};
pub use scene::{read_degradation, read_scene, SceneFile};
pub use truth::{read_truth, write_truth, TruthFile};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: unsupported format: {message}")]
    Unsupported { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FileError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FileError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn invalid(path: &std::path::Path, message: impl Into<String>) -> Self {
        FileError::Invalid { path: path.display().to_string(), message: message.into() }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        FileError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Reads a JSON document, rejecting unknown keys by name via serde.
pub(crate) fn read_json<T: serde::de::DeserializeOwned>(
    path: &std::path::Path,
) -> Result<T, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FileError::invalid(path, e.to_string()))
}

pub(crate) fn write_json<T: serde::Serialize>(
    path: &std::path::Path,
    value: &T,
) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| FileError::invalid(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FileError::io(path, e))
}
