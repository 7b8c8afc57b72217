//! kd-tree spatial index over a point cloud.
//!
//! Queries are contract-bound to return exactly what a brute-force linear
//! scan would, with distance ties broken by the lowest point id.

use super::{GeometryError, Point3, PointCloud};

/// Immutable nearest-neighbor index with kd-tree semantics.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    // Point ids permuted so that every subtree occupies a contiguous slice;
    // the splitting point of slice [lo, hi) sits at its midpoint, split axis
    // cycles with depth.
    order: Vec<u32>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self, GeometryError> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point3]) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyInput);
        }
        let points = points.to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        build_recursive(&points, &mut order, 0);
        Ok(Self { points, order })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Id and distance of the point closest to `q`; ties go to the lowest id.
    pub fn nearest(&self, q: Point3) -> (usize, f64) {
        let mut best = Best { id: u32::MAX, d2: f64::INFINITY };
        self.nearest_rec(q, 0, self.order.len(), 0, None, &mut best);
        (best.id as usize, best.d2.sqrt())
    }

    /// Like [`nearest`](Self::nearest) but ignoring point id `skip`.
    pub fn nearest_excluding(&self, q: Point3, skip: usize) -> Option<(usize, f64)> {
        let mut best = Best { id: u32::MAX, d2: f64::INFINITY };
        self.nearest_rec(q, 0, self.order.len(), 0, Some(skip as u32), &mut best);
        if best.id == u32::MAX {
            None
        } else {
            Some((best.id as usize, best.d2.sqrt()))
        }
    }

    /// Ids of all points within distance `r` of `q` (inclusive), ascending.
    pub fn radius_search(&self, q: Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(q, r * r, 0, self.order.len(), 0, &mut out);
        out.sort_unstable();
        out
    }

    fn nearest_rec(
        &self,
        q: Point3,
        lo: usize,
        hi: usize,
        depth: usize,
        skip: Option<u32>,
        best: &mut Best,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let id = self.order[mid];
        let p = self.points[id as usize];
        if Some(id) != skip {
            let d2 = (p - q).norm_squared();
            if d2 < best.d2 || (d2 == best.d2 && id < best.id) {
                *best = Best { id, d2 };
            }
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near_lo, near_hi, far_lo, far_hi) = if diff < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.nearest_rec(q, near_lo, near_hi, depth + 1, skip, best);
        // The far half-space can only matter when the splitting plane is at
        // least as close as the current best (equality kept for id ties).
        if diff * diff <= best.d2 {
            self.nearest_rec(q, far_lo, far_hi, depth + 1, skip, best);
        }
    }

    fn radius_rec(&self, q: Point3, r2: f64, lo: usize, hi: usize, depth: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let id = self.order[mid];
        let p = self.points[id as usize];
        if (p - q).norm_squared() <= r2 {
            out.push(id as usize);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near_lo, near_hi, far_lo, far_hi) = if diff < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.radius_rec(q, r2, near_lo, near_hi, depth + 1, out);
        if diff * diff <= r2 {
            self.radius_rec(q, r2, far_lo, far_hi, depth + 1, out);
        }
    }
}

struct Best {
    id: u32,
    d2: f64,
}

fn build_recursive(points: &[Point3], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    // (coordinate, id) comparison keeps the build deterministic under
    // duplicate coordinates.
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ka = (points[a as usize][axis], a);
        let kb = (points[b as usize][axis], b);
        ka.partial_cmp(&kb).expect("finite coordinates")
    });
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

/// Median distance from each point to its nearest other point.
///
/// The scale-free basis for contact distances and matching radii. Falls back
/// to the mean of positive spacings when duplicates drive the median to zero.
pub fn median_nn_spacing(cloud: &PointCloud) -> Result<f64, GeometryError> {
    if cloud.len() < 2 {
        return Err(GeometryError::DegenerateInput(
            "median spacing needs at least 2 points".into(),
        ));
    }
    let index = SpatialIndex::build(cloud)?;
    let mut spacings: Vec<f64> = (0..cloud.len())
        .map(|i| {
            index
                .nearest_excluding(cloud.point(i), i)
                .map(|(_, d)| d)
                .unwrap_or(0.0)
        })
        .collect();
    spacings.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = spacings.len() / 2;
    let median = if spacings.len() % 2 == 0 {
        0.5 * (spacings[mid - 1] + spacings[mid])
    } else {
        spacings[mid]
    };
    if median > 0.0 {
        return Ok(median);
    }
    let positive: Vec<f64> = spacings.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Err(GeometryError::DegenerateInput("all points coincident".into()));
    }
    Ok(positive.iter().sum::<f64>() / positive.len() as f64)
}
