//! Axis-aligned bounding boxes.

use super::{GeometryError, Point3};

/// Axis-aligned box, `min ≤ max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// Box grown by `margin` on every face.
    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = nalgebra::Vector3::repeat(margin);
        Aabb { min: self.min - m, max: self.max + m }
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        Aabb {
            min: c + (self.min - c) * factor,
            max: c + (self.max - c) * factor,
        }
    }
}

/// Smallest axis-aligned box containing `points`, expanded by `margin`.
pub fn aabb_of(points: &[Point3], margin: f64) -> Result<Aabb, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut min = points[0];
    let mut max = points[0];
    for p in &points[1..] {
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    Ok(Aabb { min, max }.expanded(margin))
}
