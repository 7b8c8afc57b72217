//! Ground-truth document (JSON) written next to synthetic scenes: exact
//! transforms, per-target-point provenance, and relative paths to the scene
//! files so evaluation can reload the geometry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, write_json, FileError, TransformDto};
use crate::geometry::RigidTransform;
use crate::synthetic::{GroundTruth, PointProvenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub global: TransformDto,
    pub part_transforms: Vec<TransformDto>,
    /// Source index per target point; -1 marks an outlier.
    pub provenance: Vec<i64>,
    /// Paths relative to this file's directory.
    pub source_ply: String,
    pub labels: String,
    pub target_ply: String,
}

impl TruthFile {
    pub fn from_truth(
        truth: &GroundTruth,
        source_ply: &str,
        labels: &str,
        target_ply: &str,
    ) -> Self {
        Self {
            global: TransformDto::from_transform(&truth.global_transform),
            part_transforms: truth
                .part_transforms
                .iter()
                .map(TransformDto::from_transform)
                .collect(),
            provenance: truth
                .provenance
                .iter()
                .map(|p| match p {
                    PointProvenance::Source(i) => *i as i64,
                    PointProvenance::Outlier => -1,
                })
                .collect(),
            source_ply: source_ply.to_string(),
            labels: labels.to_string(),
            target_ply: target_ply.to_string(),
        }
    }

    pub fn to_truth(&self) -> Result<GroundTruth, String> {
        let global = self
            .global
            .to_transform()
            .map_err(|e| format!("global transform: {e}"))?;
        let part_transforms = self
            .part_transforms
            .iter()
            .enumerate()
            .map(|(i, dto)| dto.to_transform().map_err(|e| format!("part {i}: {e}")))
            .collect::<Result<Vec<RigidTransform>, _>>()?;
        let provenance = self
            .provenance
            .iter()
            .map(|&v| {
                if v < 0 {
                    Ok(PointProvenance::Outlier)
                } else {
                    usize::try_from(v)
                        .map(PointProvenance::Source)
                        .map_err(|_| format!("bad provenance value {v}"))
                }
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(GroundTruth { global_transform: global, part_transforms, provenance })
    }
}

pub fn write_truth(file: &TruthFile, path: &Path) -> Result<(), FileError> {
    write_json(path, file)
}

pub fn read_truth(path: &Path) -> Result<TruthFile, FileError> {
    let file: TruthFile = read_json(path)?;
    file.to_truth().map_err(|e| FileError::invalid(path, e))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn roundtrip_preserves_provenance() {
        let dir = std::env::temp_dir().join("pwr_align_truth_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truth.json");

        let truth = GroundTruth {
            global_transform: RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)),
            part_transforms: vec![RigidTransform::identity(); 2],
            provenance: vec![
                PointProvenance::Source(0),
                PointProvenance::Outlier,
                PointProvenance::Source(5),
            ],
        };
        let file = TruthFile::from_truth(&truth, "s.ply", "s.labels", "t.ply");
        write_truth(&file, &path).unwrap();
        let back = read_truth(&path).unwrap().to_truth().unwrap();
        assert_eq!(back.provenance, truth.provenance);
        assert_eq!(back.part_transforms.len(), 2);
    }
}
