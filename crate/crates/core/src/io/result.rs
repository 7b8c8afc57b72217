//! Registration result document (JSON). Transforms are stored as a row-major
//! 3×3 rotation plus a translation 3-vector and re-validated on load.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{read_json, write_json, ConfigFile, FileError};
use crate::correspondence::DensityEntry;
use crate::geometry::RigidTransform;
use crate::graph::PartId;
use crate::pipeline::RegistrationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDto {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl TransformDto {
    pub fn from_transform(t: &RigidTransform) -> Self {
        let r = t.rotation();
        Self {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, crate::geometry::GeometryError> {
        let r = Matrix3::from_row_slice(&[
            self.rotation[0][0], self.rotation[0][1], self.rotation[0][2],
            self.rotation[1][0], self.rotation[1][1], self.rotation[1][2],
            self.rotation[2][0], self.rotation[2][1], self.rotation[2][2],
        ]);
        RigidTransform::new(r, Vector3::new(self.translation[0], self.translation[1], self.translation[2]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartResult {
    pub part_id: PartId,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub status: String,
    pub rmse: Option<f64>,
    pub inlier_count: Option<usize>,
    pub correspondence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub global: TransformDto,
    pub global_rmse: f64,
    pub global_inlier_count: usize,
    pub adjacency_delta: f64,
    pub tau_joint: f64,
    pub parts: Vec<PartResult>,
    pub density: Vec<DensityEntry>,
    /// Echo of the effective configuration, seeds included.
    pub config: ConfigFile,
}

impl ResultFile {
    pub fn from_result(result: &RegistrationResult, config: &ConfigFile) -> Self {
        let parts = result
            .part_transforms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let dto = TransformDto::from_transform(t);
                PartResult {
                    part_id: PartId(i as u32),
                    rotation: dto.rotation,
                    translation: dto.translation,
                    status: result.part_status[i].to_string(),
                    rmse: result.diagnostics[i].rmse,
                    inlier_count: result.diagnostics[i].inlier_count,
                    correspondence_count: result.diagnostics[i].correspondence_count,
                }
            })
            .collect();
        Self {
            global: TransformDto::from_transform(&result.global_transform),
            global_rmse: result.global_rmse,
            global_inlier_count: result.global_inlier_count,
            adjacency_delta: result.adjacency_delta,
            tau_joint: result.tau_joint,
            parts,
            density: result.density.clone(),
            config: config.clone(),
        }
    }

    /// Absolute per-part transforms, validated.
    pub fn part_transforms(&self) -> Result<Vec<(PartId, RigidTransform)>, String> {
        self.parts
            .iter()
            .map(|p| {
                let dto = TransformDto { rotation: p.rotation, translation: p.translation };
                dto.to_transform()
                    .map(|t| (p.part_id, t))
                    .map_err(|e| format!("part {}: {e}", p.part_id))
            })
            .collect()
    }

    pub fn part_status(&self, id: PartId) -> Option<&str> {
        self.parts
            .iter()
            .find(|p| p.part_id == id)
            .map(|p| p.status.as_str())
    }
}

pub fn write_result(file: &ResultFile, path: &Path) -> Result<(), FileError> {
    write_json(path, file)
}

/// Loads and validates a result document: every transform must satisfy the
/// rigid-transform invariants.
pub fn read_result(path: &Path) -> Result<ResultFile, FileError> {
    let file: ResultFile = read_json(path)?;
    file.global
        .to_transform()
        .map_err(|e| FileError::invalid(path, format!("global transform: {e}")))?;
    file.part_transforms()
        .map_err(|e| FileError::invalid(path, e))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pwr_align_result_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn transform_dto_roundtrip() {
        let t = RigidTransform::from_axis_angle(Vector3::z_axis(), 0.3);
        let dto = TransformDto::from_transform(&t);
        let back = dto.to_transform().unwrap();
        assert!((back.rotation() - t.rotation()).norm() < 1e-15);
    }

    #[test]
    fn scaled_rotation_fails_validation() {
        let mut dto = TransformDto::from_transform(&RigidTransform::identity());
        dto.rotation[0][0] = 2.0;
        assert!(dto.to_transform().is_err());
    }

    #[test]
    fn result_file_roundtrip_and_reload_validation() {
        let path = tmp("result.json");
        let file = ResultFile {
            global: TransformDto::from_transform(&RigidTransform::identity()),
            global_rmse: 0.01,
            global_inlier_count: 42,
            adjacency_delta: 0.05,
            tau_joint: 0.15,
            parts: vec![PartResult {
                part_id: PartId(0),
                rotation: TransformDto::from_transform(&RigidTransform::identity()).rotation,
                translation: [0.0, 0.0, 0.0],
                status: "adjusted".into(),
                rmse: Some(0.001),
                inlier_count: Some(10),
                correspondence_count: 12,
            }],
            density: vec![],
            config: ConfigFile::default(),
        };
        write_result(&file, &path).unwrap();
        let back = read_result(&path).unwrap();
        assert_eq!(back, file);
    }
}
