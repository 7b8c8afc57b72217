//! Local geometric features: normal estimation and fast point feature
//! histograms, used by the descriptor-based correspondence matcher.

use nalgebra::Vector3;

use crate::geometry::{Point3, PointCloud, SpatialIndex};

/// Histogram bins per angular feature; three features per descriptor.
pub const HISTOGRAM_BINS: usize = 11;
/// Descriptor dimensionality.
pub const DESCRIPTOR_DIM: usize = 3 * HISTOGRAM_BINS;

pub type Descriptor = [f64; DESCRIPTOR_DIM];

/// Per-point unit normals from a PCA of the radius neighborhood.
///
/// Orientation is fixed by pointing away from the cloud centroid, which is
/// deterministic and rotation-equivariant (the same rule applied to a rigidly
/// moved copy yields rotated normals).
pub fn estimate_normals(cloud: &PointCloud, index: &SpatialIndex, radius: f64) -> Vec<Vector3<f64>> {
    let centroid = {
        let mut c = Vector3::zeros();
        for p in cloud.points() {
            c += p.coords;
        }
        Point3::from(c / cloud.len() as f64)
    };

    (0..cloud.len())
        .map(|i| {
            let p = cloud.point(i);
            let mut r = radius;
            let mut neighbors = index.radius_search(p, r);
            // Sparse spots: widen until the plane fit is determined.
            for _ in 0..4 {
                if neighbors.len() >= 3 {
                    break;
                }
                r *= 2.0;
                neighbors = index.radius_search(p, r);
            }
            let normal = if neighbors.len() >= 3 {
                plane_normal(cloud, &neighbors)
            } else {
                Vector3::z()
            };
            orient_outward(normal, p, centroid)
        })
        .collect()
}

fn plane_normal(cloud: &PointCloud, ids: &[usize]) -> Vector3<f64> {
    let mut mean = Vector3::zeros();
    for &i in ids {
        mean += cloud.point(i).coords;
    }
    mean /= ids.len() as f64;
    let mut cov = nalgebra::Matrix3::zeros();
    for &i in ids {
        let d = cloud.point(i).coords - mean;
        cov += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    // Smallest eigenvalue's eigenvector is the plane normal.
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let n = eig.eigenvectors.column(k).into_owned();
    if n.norm() > 0.0 {
        n.normalize()
    } else {
        Vector3::z()
    }
}

fn orient_outward(n: Vector3<f64>, p: Point3, centroid: Point3) -> Vector3<f64> {
    if n.dot(&(p - centroid)) < 0.0 {
        -n
    } else {
        n
    }
}

/// FPFH descriptor for every point: a simplified histogram (alpha, phi,
/// theta Darboux-frame angles) over the radius neighborhood, then blended
/// with inverse-distance-weighted neighbor histograms.
pub fn fpfh_descriptors(
    cloud: &PointCloud,
    normals: &[Vector3<f64>],
    index: &SpatialIndex,
    radius: f64,
) -> Vec<Descriptor> {
    let n = cloud.len();
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            index
                .radius_search(cloud.point(i), radius)
                .into_iter()
                .filter(|&j| j != i)
                .collect()
        })
        .collect();

    let spfh: Vec<Descriptor> = (0..n)
        .map(|i| {
            let mut hist = [0.0; DESCRIPTOR_DIM];
            let mut count = 0usize;
            for &j in &neighborhoods[i] {
                if let Some((alpha, phi, theta)) =
                    pair_angles(cloud.point(i), normals[i], cloud.point(j), normals[j])
                {
                    bin_into(&mut hist, alpha, phi, theta);
                    count += 1;
                }
            }
            if count > 0 {
                for v in &mut hist {
                    *v /= count as f64;
                }
            }
            hist
        })
        .collect();

    (0..n)
        .map(|i| {
            let mut out = spfh[i];
            let k = neighborhoods[i].len();
            if k > 0 {
                let mut acc = [0.0; DESCRIPTOR_DIM];
                for &j in &neighborhoods[i] {
                    let dist = (cloud.point(i) - cloud.point(j)).norm().max(1e-12);
                    let w = 1.0 / dist;
                    for (a, s) in acc.iter_mut().zip(spfh[j].iter()) {
                        *a += w * s;
                    }
                }
                for (o, a) in out.iter_mut().zip(acc.iter()) {
                    *o += a / k as f64;
                }
            }
            out
        })
        .collect()
}

/// Darboux-frame angles for a point pair; `None` for coincident points or a
/// degenerate frame.
fn pair_angles(
    p1: Point3,
    n1: Vector3<f64>,
    p2: Point3,
    n2: Vector3<f64>,
) -> Option<(f64, f64, f64)> {
    let mut ps = p1;
    let mut pt = p2;
    let mut ns = n1;
    let mut nt = n2;
    let mut dp = pt - ps;
    let d = dp.norm();
    if d < 1e-12 {
        return None;
    }
    // Pick as source the point whose normal makes the smaller angle with the
    // connecting line, so the pair feature is order-independent.
    if ns.dot(&dp).abs() < nt.dot(&dp).abs() {
        std::mem::swap(&mut ps, &mut pt);
        std::mem::swap(&mut ns, &mut nt);
        dp = -dp;
    }
    let u = ns;
    let mut v = dp.cross(&u);
    let vn = v.norm();
    if vn < 1e-12 {
        return None;
    }
    v /= vn;
    let w = u.cross(&v);

    let alpha = v.dot(&nt).clamp(-1.0, 1.0);
    let phi = (u.dot(&dp) / d).clamp(-1.0, 1.0);
    let theta = w.dot(&nt).atan2(u.dot(&nt));
    Some((alpha, phi, theta))
}

fn bin_into(hist: &mut Descriptor, alpha: f64, phi: f64, theta: f64) {
    let unit_bin = |x: f64| -> usize {
        // x in [-1, 1]
        (((x + 1.0) / 2.0 * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
    };
    let angle_bin = |x: f64| -> usize {
        // x in [-pi, pi]
        ((((x + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)) * HISTOGRAM_BINS as f64)
            as usize)
            .min(HISTOGRAM_BINS - 1)
    };
    hist[unit_bin(alpha)] += 1.0;
    hist[HISTOGRAM_BINS + unit_bin(phi)] += 1.0;
    hist[2 * HISTOGRAM_BINS + angle_bin(theta)] += 1.0;
}

pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
