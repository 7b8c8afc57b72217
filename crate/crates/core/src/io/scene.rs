//! Scene and degradation description documents (JSON) consumed by the synth
//! command. Angles are given in degrees in the files.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{read_json, FileError, TransformDto};
use crate::geometry::{Point3, RigidTransform};
use crate::graph::PartId;
use crate::synthetic::{
    ArticulatedSpec, DegradationSpec, JointSpec, PartSpec, PrimitiveShape,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDto {
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartDto {
    pub shape: ShapeDto,
    /// Omitted pose means identity.
    #[serde(default)]
    pub pose: Option<TransformDto>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDto {
    pub parent: u32,
    pub child: u32,
    pub axis_point: [f64; 3],
    pub axis_dir: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub parts: Vec<PartDto>,
    #[serde(default)]
    pub joints: Vec<JointDto>,
    #[serde(default)]
    pub rng_seed: u64,
    /// One angle per joint, degrees.
    #[serde(default)]
    pub joint_angles_deg: Vec<f64>,
    /// Omitted means identity.
    #[serde(default)]
    pub global: Option<TransformDto>,
}

impl SceneFile {
    pub fn to_spec(&self, path: &Path) -> Result<(ArticulatedSpec, Vec<f64>, RigidTransform), FileError> {
        let parts = self
            .parts
            .iter()
            .map(|p| {
                let shape = match p.shape {
                    ShapeDto::Box { half_extents } => PrimitiveShape::Box {
                        half_extents: Vector3::from(half_extents),
                    },
                    ShapeDto::Cylinder { radius, half_height } => {
                        PrimitiveShape::Cylinder { radius, half_height }
                    }
                    ShapeDto::Sphere { radius } => PrimitiveShape::Sphere { radius },
                };
                let pose = match &p.pose {
                    None => RigidTransform::identity(),
                    Some(dto) => dto
                        .to_transform()
                        .map_err(|e| FileError::invalid(path, format!("part pose: {e}")))?,
                };
                Ok(PartSpec { shape, pose, sample_count: p.sample_count })
            })
            .collect::<Result<Vec<_>, FileError>>()?;
        let joints = self
            .joints
            .iter()
            .map(|j| JointSpec {
                parent: PartId(j.parent),
                child: PartId(j.child),
                axis_point: Point3::new(j.axis_point[0], j.axis_point[1], j.axis_point[2]),
                axis_dir: Vector3::from(j.axis_dir),
            })
            .collect();
        if self.joint_angles_deg.len() != self.joints.len() {
            return Err(FileError::invalid(
                path,
                format!(
                    "{} joint_angles_deg for {} joints",
                    self.joint_angles_deg.len(),
                    self.joints.len()
                ),
            ));
        }
        let angles: Vec<f64> = self.joint_angles_deg.iter().map(|a| a.to_radians()).collect();
        let global = match &self.global {
            None => RigidTransform::identity(),
            Some(dto) => dto
                .to_transform()
                .map_err(|e| FileError::invalid(path, format!("global transform: {e}")))?,
        };
        Ok((
            ArticulatedSpec { parts, joints, rng_seed: self.rng_seed },
            angles,
            global,
        ))
    }
}

pub fn read_scene(path: &Path) -> Result<SceneFile, FileError> {
    read_json(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationDto {
    pub noise_sigma: f64,
    pub keep_fraction: f64,
    pub view_direction: Option<[f64; 3]>,
    pub outlier_points: usize,
    pub rng_seed: u64,
}

impl Default for DegradationDto {
    fn default() -> Self {
        let d = DegradationSpec::default();
        Self {
            noise_sigma: d.noise_sigma,
            keep_fraction: d.keep_fraction,
            view_direction: None,
            outlier_points: d.outlier_points,
            rng_seed: d.rng_seed,
        }
    }
}

pub fn read_degradation(path: &Path) -> Result<DegradationSpec, FileError> {
    let dto: DegradationDto = read_json(path)?;
    Ok(DegradationSpec {
        noise_sigma: dto.noise_sigma,
        keep_fraction: dto.keep_fraction,
        view_direction: dto.view_direction.map(Vector3::from),
        outlier_points: dto.outlier_points,
        rng_seed: dto.rng_seed,
    })
}
