//! Geometric foundations: points, clouds, rigid transforms, bounding boxes and
//! a nearest-neighbor spatial index. Everything downstream builds on these.

mod aabb;
mod fit;
mod kdtree;
mod transform;

pub use aabb::{aabb_of, Aabb};
pub use fit::fit_rigid;
pub use kdtree::{median_nn_spacing, SpatialIndex};
pub use transform::RigidTransform;

use nalgebra::Vector3;
use thiserror::Error;

/// 3D point, meters.
pub type Point3 = nalgebra::Point3<f64>;

/// Unit normal tolerance for [`PointCloud::with_normals`].
pub const NORMAL_UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("normal at index {0} is not unit length")]
    NotUnitNormal(usize),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
}

/// Ordered set of 3D points with optional per-point unit normals.
///
/// Immutable after construction; point order is meaningful (indices are used
/// as point ids everywhere).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    /// Builds a cloud without normals. Rejects non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self, GeometryError> {
        check_finite(&points)?;
        Ok(Self { points, normals: None })
    }

    /// Builds a cloud with one unit normal per point.
    pub fn with_normals(
        points: Vec<Point3>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self, GeometryError> {
        check_finite(&points)?;
        if normals.len() != points.len() {
            return Err(GeometryError::LengthMismatch(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        for (i, n) in normals.iter().enumerate() {
            if !n.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
            if (n.norm() - 1.0).abs() > NORMAL_UNIT_TOL {
                return Err(GeometryError::NotUnitNormal(i));
            }
        }
        Ok(Self { points, normals: Some(normals) })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn point(&self, id: usize) -> Point3 {
        self.points[id]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cloud restricted to the given point ids, in the given order.
    pub fn select(&self, ids: &[usize]) -> PointCloud {
        PointCloud {
            points: ids.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ids.iter().map(|&i| ns[i]).collect()),
        }
    }
}

fn check_finite(points: &[Point3]) -> Result<(), GeometryError> {
    for (i, p) in points.iter().enumerate() {
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
    }
    Ok(())
}

/// Root-mean-square of nearest-neighbor distances from each point of `a` to `b`.
pub fn nn_rmse(a: &PointCloud, b: &PointCloud) -> Result<f64, GeometryError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let index = SpatialIndex::build(b)?;
    let sum_sq: f64 = a
        .points()
        .iter()
        .map(|p| {
            let (_, d) = index.nearest(*p);
            d * d
        })
        .sum();
    Ok((sum_sq / a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn cloud_rejects_nan() {
        assert!(PointCloud::new(vec![pt(0.0, f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn cloud_rejects_non_unit_normals() {
        let r = PointCloud::with_normals(
            vec![pt(0.0, 0.0, 0.0)],
            vec![Vector3::new(0.0, 0.0, 0.5)],
        );
        assert!(matches!(r, Err(GeometryError::NotUnitNormal(0))));
    }

    #[test]
    fn cloud_normal_count_must_match() {
        let r = PointCloud::with_normals(vec![pt(0.0, 0.0, 0.0)], vec![]);
        assert!(matches!(r, Err(GeometryError::LengthMismatch(_))));
    }

    #[test]
    fn nn_rmse_identical_clouds_is_zero() {
        let c = PointCloud::new(vec![pt(0.0, 0.0, 0.0), pt(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(nn_rmse(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn nn_rmse_single_point_offset() {
        let a = PointCloud::new(vec![pt(0.0, 0.0, 0.0)]).unwrap();
        let b = PointCloud::new(vec![pt(0.25, 0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(nn_rmse(&a, &b).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn nn_rmse_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_cloud = |n: usize| {
            let pts = (0..n)
                .map(|_| {
                    pt(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            PointCloud::new(pts).unwrap()
        };
        let a = rand_cloud(120);
        let b = rand_cloud(90);
        let brute: f64 = {
            let sum: f64 = a
                .points()
                .iter()
                .map(|p| {
                    b.points()
                        .iter()
                        .map(|q| (p - q).norm_squared())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            (sum / a.len() as f64).sqrt()
        };
        assert_abs_diff_eq!(nn_rmse(&a, &b).unwrap(), brute, epsilon = 1e-12);
    }
}
