//! SE(3) rigid transforms: proper rotation + translation, no scale.

use nalgebra::{Matrix3, Unit, Vector3};

use super::{GeometryError, Point3, PointCloud};

/// Per-entry tolerance for the orthonormality and determinant invariants.
pub const ROTATION_TOL: f64 = 1e-9;

/// Rigid transform `x ↦ R·x + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates the rotation (orthonormal within 1e-9 per entry, det = +1)
    /// before accepting it. Use this at trust boundaries (file loads).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation.iter().all(|c| c.is_finite()) || !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidTransform("non-finite entries".into()));
        }
        let drift = orthonormality_drift(&rotation);
        if drift > ROTATION_TOL {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation not orthonormal (max |RᵀR - I| = {drift:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation determinant {det} != +1 (reflection or scale)"
            )));
        }
        Ok(Self { rotation, translation })
    }

    /// Internal constructor for rotations produced by our own kernels.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(orthonormality_drift(&rotation) <= 1e-7);
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `angle` radians about `axis` through the origin.
    pub fn from_axis_angle(axis: Unit<Vector3<f64>>, angle: f64) -> Self {
        Self {
            rotation: nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle` radians about the axis through `center` with
    /// direction `axis` — the hinge motion `x ↦ c + R·(x − c)`.
    pub fn rotation_about_axis(center: Point3, axis: Unit<Vector3<f64>>, angle: f64) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
        let t = center.coords - r * center.coords;
        Self { rotation: r, translation: t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_point(&self, p: Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Transforms every point; normals are rotated only.
    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points().iter().map(|p| self.apply_point(*p)).collect();
        match cloud.normals() {
            None => PointCloud::new(points).expect("rigid transform keeps points finite"),
            Some(ns) => {
                let normals = ns.iter().map(|n| self.rotation * n).collect();
                PointCloud::with_normals(points, normals)
                    .expect("rotation keeps normals unit length")
            }
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    ///
    /// Re-projects the rotation onto SO(3) when accumulated floating-point
    /// drift would otherwise violate the orthonormality invariant.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_drift(&rotation) > ROTATION_TOL {
            rotation = orthonormalize(&rotation);
        }
        RigidTransform {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Geodesic angle (radians) of the relative rotation to `other`.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }
}

/// Max absolute entry of `RᵀR − I`.
pub(crate) fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    let e = r.transpose() * r - Matrix3::identity();
    e.iter().fold(0.0, |m, c| m.max(c.abs()))
}

/// Nearest proper rotation via polar decomposition (SVD).
pub(crate) fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = nalgebra::SVD::new(*r, true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        // Flip the direction of least significance to stay in SO(3).
        let mut u = u;
        u.column_mut(2).scale_mut(-1.0);
        out = u * v_t;
    }
    out
}

/// Uniformly random proper rigid transform, used by tests across the crate.
#[cfg(test)]
pub(crate) fn random_transform(rng: &mut rand_chacha::ChaCha8Rng) -> RigidTransform {
    use rand::Rng;
    let axis = Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ));
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let t = Vector3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    let mut tf = RigidTransform::from_axis_angle(axis, angle);
    tf.translation = t;
    tf
}
