//! Synthetic articulated scenes with ground truth: primitive-part generation,
//! hinge articulation, and scan degradation (noise, sparsity, partial view,
//! outliers). Stands in for real captures during evaluation.

use nalgebra::{Unit, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{aabb_of, GeometryError, Point3, PointCloud, RigidTransform};
use crate::graph::PartId;

/// Where a target point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointProvenance {
    /// Index of the originating source point.
    Source(usize),
    /// Spurious point with no source counterpart.
    Outlier,
}

/// Surface primitive in its local frame, centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveShape {
    Box { half_extents: Vector3<f64> },
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct PartSpec {
    pub shape: PrimitiveShape,
    /// Local-frame → object-frame placement.
    pub pose: RigidTransform,
    pub sample_count: usize,
}

/// Revolute joint: the child subtree rotates about the axis through
/// `axis_point` with direction `axis_dir` (rest-pose coordinates).
#[derive(Debug, Clone)]
pub struct JointSpec {
    pub parent: PartId,
    pub child: PartId,
    pub axis_point: Point3,
    pub axis_dir: Vector3<f64>,
}

/// An articulated body: parts joined by hinges in a tree rooted at part 0.
#[derive(Debug, Clone)]
pub struct ArticulatedSpec {
    pub parts: Vec<PartSpec>,
    pub joints: Vec<JointSpec>,
    pub rng_seed: u64,
}

/// Scan degradation model.
#[derive(Debug, Clone)]
pub struct DegradationSpec {
    /// Isotropic Gaussian position noise, meters.
    pub noise_sigma: f64,
    /// Uniform subsampling fraction in (0, 1].
    pub keep_fraction: f64,
    /// When present, points whose outward normal faces away from the viewer
    /// (positive dot with this direction) are culled.
    pub view_direction: Option<Vector3<f64>>,
    /// Spurious points appended uniformly within 1.5× the scene box.
    pub outlier_points: usize,
    pub rng_seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            keep_fraction: 1.0,
            view_direction: None,
            outlier_points: 0,
            rng_seed: 0,
        }
    }
}

/// Exact per-part transforms and per-target-point provenance for a scene.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub global_transform: RigidTransform,
    pub part_transforms: Vec<RigidTransform>,
    pub provenance: Vec<PointProvenance>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("degradation removed every point")]
    EmptyResult,
    #[error("view culling requires per-point normals")]
    MissingNormals,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Minimum admissible per-part sample count.
pub const MIN_PART_SAMPLES: usize = 50;

/// Samples every part's surface uniformly (deterministic per seed) and
/// returns the rest-pose cloud with per-point part labels and analytic
/// outward normals.
pub fn generate(spec: &ArticulatedSpec) -> Result<(PointCloud, Vec<PartId>), SynthError> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    for (part_idx, part) in spec.parts.iter().enumerate() {
        for _ in 0..part.sample_count {
            let (p, n) = sample_surface(&part.shape, &mut rng);
            points.push(part.pose.apply_point(p));
            normals.push(part.pose.apply_vector(n));
            labels.push(PartId(part_idx as u32));
        }
    }
    Ok((PointCloud::with_normals(points, normals)?, labels))
}

fn validate_spec(spec: &ArticulatedSpec) -> Result<(), SynthError> {
    if spec.parts.is_empty() {
        return Err(SynthError::InvalidSpec("no parts".into()));
    }
    let k = spec.parts.len();
    for (i, part) in spec.parts.iter().enumerate() {
        if part.sample_count < MIN_PART_SAMPLES {
            return Err(SynthError::InvalidSpec(format!(
                "part {i} has {} samples; minimum is {MIN_PART_SAMPLES}",
                part.sample_count
            )));
        }
        let ok = match part.shape {
            PrimitiveShape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            PrimitiveShape::Cylinder { radius, half_height } => radius > 0.0 && half_height > 0.0,
            PrimitiveShape::Sphere { radius } => radius > 0.0,
        };
        if !ok {
            return Err(SynthError::InvalidSpec(format!("part {i} has non-positive dimensions")));
        }
    }
    if spec.joints.len() + 1 != k {
        return Err(SynthError::InvalidSpec(format!(
            "{} joints for {k} parts; a tree needs exactly {}",
            spec.joints.len(),
            k - 1
        )));
    }
    let mut child_seen = vec![false; k];
    for j in &spec.joints {
        if j.parent.index() >= k || j.child.index() >= k {
            return Err(SynthError::InvalidSpec("joint references unknown part".into()));
        }
        if j.child == PartId(0) {
            return Err(SynthError::InvalidSpec("part 0 is the root and cannot be a child".into()));
        }
        if child_seen[j.child.index()] {
            return Err(SynthError::InvalidSpec(format!("part {} has two parents", j.child)));
        }
        child_seen[j.child.index()] = true;
        if j.axis_dir.norm() < 1e-12 {
            return Err(SynthError::InvalidSpec("joint axis direction is zero".into()));
        }
    }
    // Every non-root part has exactly one parent and joints = k-1, so the
    // joint graph is a tree iff it is acyclic; verify reachability from 0.
    let mut reached = vec![false; k];
    reached[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for j in &spec.joints {
            if reached[j.parent.index()] && !reached[j.child.index()] {
                reached[j.child.index()] = true;
                changed = true;
            }
        }
    }
    if reached.iter().any(|r| !r) {
        return Err(SynthError::InvalidSpec("joint tree is not rooted at part 0".into()));
    }
    Ok(())
}

fn sample_surface(shape: &PrimitiveShape, rng: &mut ChaCha8Rng) -> (Point3, Vector3<f64>) {
    match *shape {
        PrimitiveShape::Box { half_extents: h } => {
            // Face picked proportionally to area.
            let areas = [
                h.y * h.z, // ±x
                h.x * h.z, // ±y
                h.x * h.y, // ±z
            ];
            let total: f64 = 2.0 * areas.iter().sum::<f64>();
            let mut pick = rng.random_range(0.0..total);
            let mut face = 5;
            for i in 0..6 {
                let a = areas[i / 2];
                if pick < a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            let u = rng.random_range(-1.0..1.0);
            let v = rng.random_range(-1.0..1.0);
            match face / 2 {
                0 => (Point3::new(sign * h.x, u * h.y, v * h.z), Vector3::new(sign, 0.0, 0.0)),
                1 => (Point3::new(u * h.x, sign * h.y, v * h.z), Vector3::new(0.0, sign, 0.0)),
                _ => (Point3::new(u * h.x, v * h.y, sign * h.z), Vector3::new(0.0, 0.0, sign)),
            }
        }
        PrimitiveShape::Cylinder { radius, half_height } => {
            let lateral = 2.0 * std::f64::consts::PI * radius * 2.0 * half_height;
            let cap = std::f64::consts::PI * radius * radius;
            let pick = rng.random_range(0.0..lateral + 2.0 * cap);
            if pick < lateral {
                let theta = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                let z = rng.random_range(-half_height..half_height);
                (
                    Point3::new(radius * theta.cos(), radius * theta.sin(), z),
                    Vector3::new(theta.cos(), theta.sin(), 0.0),
                )
            } else {
                let sign = if pick < lateral + cap { 1.0 } else { -1.0 };
                let r = radius * rng.random_range(0.0..1.0f64).sqrt();
                let theta = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                (
                    Point3::new(r * theta.cos(), r * theta.sin(), sign * half_height),
                    Vector3::new(0.0, 0.0, sign),
                )
            }
        }
        PrimitiveShape::Sphere { radius } => {
            // Normalized Gaussian direction is uniform on the sphere.
            let dir = loop {
                let v = Vector3::new(gaussian(rng), gaussian(rng), gaussian(rng));
                if v.norm() > 1e-9 {
                    break v.normalize();
                }
            };
            (Point3::from(dir * radius), dir)
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Applies joint angles (radians, one per joint in spec order) and a global
/// transform, returning the articulated cloud plus exact ground truth.
///
/// A point of part `p` moves by `global ∘ H(j₁) ∘ … ∘ H(jₖ)` where
/// `j₁ … jₖ` are the joints on the path from the root to `p`, with each
/// hinge axis taken in rest-pose coordinates.
pub fn articulate(
    cloud: &PointCloud,
    labels: &[PartId],
    spec: &ArticulatedSpec,
    joint_angles: &[f64],
    global: &RigidTransform,
) -> Result<(PointCloud, GroundTruth), SynthError> {
    validate_spec(spec)?;
    if joint_angles.len() != spec.joints.len() {
        return Err(SynthError::InvalidSpec(format!(
            "{} joint angles for {} joints",
            joint_angles.len(),
            spec.joints.len()
        )));
    }
    if labels.len() != cloud.len() {
        return Err(SynthError::InvalidSpec(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }

    let k = spec.parts.len();
    // Accumulate hinge compositions parent-first down the tree.
    let mut accumulated: Vec<Option<RigidTransform>> = vec![None; k];
    accumulated[0] = Some(RigidTransform::identity());
    let mut remaining = k - 1;
    while remaining > 0 {
        let mut progressed = false;
        for (joint, &angle) in spec.joints.iter().zip(joint_angles) {
            if accumulated[joint.child.index()].is_some() {
                continue;
            }
            if let Some(parent_acc) = accumulated[joint.parent.index()] {
                let hinge = RigidTransform::rotation_about_axis(
                    joint.axis_point,
                    Unit::new_normalize(joint.axis_dir),
                    angle,
                );
                accumulated[joint.child.index()] = Some(parent_acc.compose(&hinge));
                remaining -= 1;
                progressed = true;
            }
        }
        debug_assert!(progressed, "validated joint tree always progresses");
        if !progressed {
            return Err(SynthError::InvalidSpec("joint tree is not well-formed".into()));
        }
    }

    let part_transforms: Vec<RigidTransform> = accumulated
        .into_iter()
        .map(|acc| global.compose(&acc.expect("all parts reached")))
        .collect();

    let points: Vec<Point3> = cloud
        .points()
        .iter()
        .zip(labels)
        .map(|(p, label)| part_transforms[label.index()].apply_point(*p))
        .collect();
    let normals = cloud.normals().map(|ns| {
        ns.iter()
            .zip(labels)
            .map(|(n, label)| part_transforms[label.index()].apply_vector(*n))
            .collect::<Vec<_>>()
    });
    let out = match normals {
        Some(ns) => PointCloud::with_normals(points, ns)?,
        None => PointCloud::new(points)?,
    };
    let truth = GroundTruth {
        global_transform: *global,
        part_transforms,
        provenance: (0..cloud.len()).map(PointProvenance::Source).collect(),
    };
    Ok((out, truth))
}

/// Applies the degradation model: Gaussian noise, uniform subsampling,
/// optional back-face culling, then appended outliers. Provenance is carried
/// through every step.
pub fn degrade(
    cloud: &PointCloud,
    truth: &GroundTruth,
    d: &DegradationSpec,
) -> Result<(PointCloud, GroundTruth), SynthError> {
    if !(d.keep_fraction > 0.0 && d.keep_fraction <= 1.0) {
        return Err(SynthError::InvalidSpec(format!(
            "keep_fraction {} not in (0, 1]",
            d.keep_fraction
        )));
    }
    if d.noise_sigma < 0.0 || !d.noise_sigma.is_finite() {
        return Err(SynthError::InvalidSpec("noise_sigma must be >= 0".into()));
    }
    if truth.provenance.len() != cloud.len() {
        return Err(SynthError::InvalidSpec("provenance does not match cloud".into()));
    }
    if let Some(v) = d.view_direction {
        if v.norm() < 1e-12 {
            return Err(SynthError::InvalidSpec("view_direction is zero".into()));
        }
        if cloud.normals().is_none() {
            return Err(SynthError::MissingNormals);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(d.rng_seed);

    let mut points: Vec<Point3> = cloud.points().to_vec();
    let mut normals: Option<Vec<Vector3<f64>>> = cloud.normals().map(|ns| ns.to_vec());
    let mut provenance = truth.provenance.clone();

    if d.noise_sigma > 0.0 {
        // Isotropic Gaussian with the displacement norm truncated at 4σ, so
        // every degraded point stays within a fixed bound of its source.
        for p in &mut points {
            let noise = loop {
                let g = Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
                if g.norm() <= 4.0 {
                    break g * d.noise_sigma;
                }
            };
            *p += noise;
        }
    }

    if d.keep_fraction < 1.0 {
        let keep = (points.len() as f64 * d.keep_fraction).round() as usize;
        if keep == 0 {
            return Err(SynthError::EmptyResult);
        }
        let mut chosen: Vec<usize> = index::sample(&mut rng, points.len(), keep).into_vec();
        chosen.sort_unstable();
        points = chosen.iter().map(|&i| points[i]).collect();
        normals = normals.map(|ns| chosen.iter().map(|&i| ns[i]).collect());
        provenance = chosen.iter().map(|&i| provenance[i]).collect();
    }

    if let Some(view) = d.view_direction {
        let view = view.normalize();
        let ns = normals.as_ref().expect("checked above");
        let kept: Vec<usize> = (0..points.len())
            .filter(|&i| ns[i].dot(&view) <= 0.0)
            .collect();
        if kept.is_empty() {
            return Err(SynthError::EmptyResult);
        }
        points = kept.iter().map(|&i| points[i]).collect();
        normals = Some(kept.iter().map(|&i| ns[i]).collect());
        provenance = kept.iter().map(|&i| provenance[i]).collect();
    }

    if d.outlier_points > 0 {
        let scene = aabb_of(&points, 0.0)?.scaled(1.5);
        for _ in 0..d.outlier_points {
            let p = Point3::new(
                rng.random_range(scene.min.x..=scene.max.x),
                rng.random_range(scene.min.y..=scene.max.y),
                rng.random_range(scene.min.z..=scene.max.z),
            );
            points.push(p);
            if let Some(ns) = &mut normals {
                // Honest garbage: outliers have no meaningful orientation.
                let dir = loop {
                    let v = Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
                    if v.norm() > 1e-9 {
                        break v.normalize();
                    }
                };
                ns.push(dir);
            }
            provenance.push(PointProvenance::Outlier);
        }
    }

    let out = match normals {
        Some(ns) => PointCloud::with_normals(points, ns)?,
        None => PointCloud::new(points)?,
    };
    let truth = GroundTruth {
        global_transform: truth.global_transform,
        part_transforms: truth.part_transforms.clone(),
        provenance,
    };
    Ok((out, truth))
}

/// Example articulated body used across tests and benches: a cubic body with
/// a narrower arm and hand chained off one face, hinge axes vertical through
/// the contact patches. Narrow contacts keep the joints hinge-like: anchors
/// sit close to the axis, so realistic joint angles open gaps well below the
/// joint-break tolerance.
///
/// `counts` are the per-part sample counts (body, arm, hand) and should be
/// descending so the tuning order is body, arm, hand.
pub fn three_part_arm(counts: [usize; 3], seed: u64) -> ArticulatedSpec {
    ArticulatedSpec {
        parts: vec![
            PartSpec {
                shape: PrimitiveShape::Box { half_extents: Vector3::new(0.25, 0.25, 0.25) },
                pose: RigidTransform::from_translation(Vector3::new(0.25, 0.25, 0.25)),
                sample_count: counts[0],
            },
            PartSpec {
                shape: PrimitiveShape::Box { half_extents: Vector3::new(0.25, 0.10, 0.10) },
                pose: RigidTransform::from_translation(Vector3::new(0.75, 0.25, 0.25)),
                sample_count: counts[1],
            },
            PartSpec {
                shape: PrimitiveShape::Box { half_extents: Vector3::new(0.20, 0.08, 0.08) },
                pose: RigidTransform::from_translation(Vector3::new(1.20, 0.25, 0.25)),
                sample_count: counts[2],
            },
        ],
        joints: vec![
            JointSpec {
                parent: PartId(0),
                child: PartId(1),
                axis_point: Point3::new(0.5, 0.25, 0.25),
                axis_dir: Vector3::z(),
            },
            JointSpec {
                parent: PartId(1),
                child: PartId(2),
                axis_point: Point3::new(1.0, 0.25, 0.25),
                axis_dir: Vector3::z(),
            },
        ],
        rng_seed: seed,
    }
}
