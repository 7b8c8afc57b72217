//! Evaluation metrics document (JSON) written by the eval command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_json, FileError};
use crate::graph::PartId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMetrics {
    pub part_id: PartId,
    /// Geodesic angle between estimated and true rotation, degrees.
    pub rotation_error_deg: f64,
    /// Displacement of the part centroid between estimated and true
    /// placement, meters.
    pub translation_error_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub parts: Vec<PartMetrics>,
    /// Whole-object nearest-neighbor RMSE of the part-wise aligned source
    /// against the target, meters.
    pub nn_rmse: f64,
}

pub fn write_metrics(file: &MetricsFile, path: &Path) -> Result<(), FileError> {
    write_json(path, file)
}
