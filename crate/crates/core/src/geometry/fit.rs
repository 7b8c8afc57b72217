//! Weighted least-squares rigid fitting (Kabsch with SVD sign correction).

use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, Point3, RigidTransform};

/// Relative tolerance on the cross-covariance singular values below which the
/// point set has no unique rotation (collinear or coincident).
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Finds the rigid transform minimizing `Σ wᵢ‖R·srcᵢ + t − dstᵢ‖²`.
///
/// The rotation is always proper: when the unconstrained optimum would be a
/// reflection, the smallest singular direction is flipped.
pub fn fit_rigid(
    src: &[Point3],
    dst: &[Point3],
    weights: Option<&[f64]>,
) -> Result<RigidTransform, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch(format!(
            "{} source vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "need at least 3 point pairs, got {}",
            src.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != src.len() {
            return Err(GeometryError::LengthMismatch(format!(
                "{} weights for {} pairs",
                w.len(),
                src.len()
            )));
        }
        if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(GeometryError::DegenerateInput(
                "weights must be finite and non-negative".into(),
            ));
        }
    }

    let n = src.len();
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let w_sum: f64 = (0..n).map(weight).sum();
    if w_sum <= 0.0 {
        return Err(GeometryError::DegenerateInput("weight sum must be positive".into()));
    }

    let mut mu_s = Vector3::zeros();
    let mut mu_d = Vector3::zeros();
    for i in 0..n {
        mu_s += weight(i) * src[i].coords;
        mu_d += weight(i) * dst[i].coords;
    }
    mu_s /= w_sum;
    mu_d /= w_sum;

    // Cross-covariance H = Σ w·(s − μs)(d − μd)ᵀ / Σ w.
    let mut h = Matrix3::zeros();
    for i in 0..n {
        let sc = src[i].coords - mu_s;
        let dc = dst[i].coords - mu_d;
        h += weight(i) * sc * dc.transpose();
    }
    h /= w_sum;

    let svd = nalgebra::SVD::new(h, true, true);
    let sigma = svd.singular_values;
    if sigma[0] < 1e-30 {
        return Err(GeometryError::DegenerateInput(
            "all points coincident within tolerance".into(),
        ));
    }
    if sigma[1] < DEGENERACY_TOL * sigma[0] {
        return Err(GeometryError::DegenerateInput(
            "points collinear within tolerance; rotation not unique".into(),
        ));
    }

    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d < 0.0 { -1.0 } else { 1.0 }));
    let rotation = v * correction * u.transpose();
    let translation = mu_d - rotation * mu_s;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Unit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn identity_when_src_equals_dst() {
        let pts = [pt(0.0, 0.0, 0.0), pt(1.0, 0.0, 0.0), pt(0.0, 1.0, 0.0)];
        let t = fit_rigid(&pts, &pts, None).unwrap();
        assert_abs_diff_eq!((t.rotation() - Matrix3::identity()).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_translation() {
        let src = [pt(1.0, 0.0, 0.0), pt(0.0, 1.0, 0.0), pt(0.0, 0.0, 1.0)];
        let shift = Vector3::new(1.0, 2.0, 3.0);
        let dst: Vec<Point3> = src.iter().map(|p| p + shift).collect();
        let t = fit_rigid(&src, &dst, None).unwrap();
        assert_abs_diff_eq!((t.rotation() - Matrix3::identity()).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((t.translation() - shift).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_about_z() {
        let src = [pt(1.0, 0.0, 0.0), pt(0.0, 1.0, 0.0), pt(0.0, 0.0, 1.0)];
        let dst = [pt(0.0, 1.0, 0.0), pt(-1.0, 0.0, 0.0), pt(0.0, 0.0, 1.0)];
        let t = fit_rigid(&src, &dst, None).unwrap();
        let expected =
            nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2)
                .into_inner();
        assert_abs_diff_eq!((t.rotation() - expected).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.translation().norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn recovers_random_transforms_to_1e9() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let truth = super::super::transform::random_transform(&mut rng);
            let src: Vec<Point3> = (0..100)
                .map(|_| {
                    pt(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(*p)).collect();
            let est = fit_rigid(&src, &dst, None).unwrap();
            assert!((est.rotation() - truth.rotation()).norm() < 1e-9);
            assert!((est.translation() - truth.translation()).norm() < 1e-9);
        }
    }

    #[test]
    fn never_returns_a_reflection() {
        // A mirrored destination makes the unconstrained optimum a reflection.
        let src: Vec<Point3> = vec![
            pt(0.0, 0.0, 0.0),
            pt(1.0, 0.0, 0.0),
            pt(0.0, 1.0, 0.0),
            pt(0.0, 0.0, 1.0),
            pt(1.0, 1.0, 0.3),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| pt(p.x, p.y, -p.z)).collect();
        let t = fit_rigid(&src, &dst, None).unwrap();
        assert_abs_diff_eq!(t.rotation().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn weighted_fit_prefers_heavy_pairs() {
        // Three consistent pairs plus one contradicting pair with tiny weight:
        // the fit should land on the consistent transform.
        let truth = RigidTransform::from_translation(Vector3::new(0.5, 0.0, 0.0));
        let src = [pt(0.0, 0.0, 0.0), pt(1.0, 0.0, 0.0), pt(0.0, 1.0, 0.0), pt(0.0, 0.0, 1.0)];
        let mut dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(*p)).collect();
        dst[3] = pt(9.0, 9.0, 9.0);
        let weights = [1.0, 1.0, 1.0, 1e-12];
        let t = fit_rigid(&src, &dst, Some(&weights)).unwrap();
        assert!((t.translation() - truth.translation()).norm() < 1e-6);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let a = [pt(0.0, 0.0, 0.0), pt(1.0, 0.0, 0.0)];
        assert!(matches!(
            fit_rigid(&a, &a, None),
            Err(GeometryError::DegenerateInput(_))
        ));

        let collinear: Vec<Point3> = (0..5).map(|i| pt(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            fit_rigid(&collinear, &collinear, None),
            Err(GeometryError::DegenerateInput(_))
        ));

        let coincident = vec![pt(1.0, 1.0, 1.0); 4];
        assert!(matches!(
            fit_rigid(&coincident, &coincident, None),
            Err(GeometryError::DegenerateInput(_))
        ));

        let tri = [pt(0.0, 0.0, 0.0), pt(1.0, 0.0, 0.0), pt(0.0, 1.0, 0.0)];
        assert!(fit_rigid(&tri, &tri, Some(&[0.0, 0.0, 0.0])).is_err());
        assert!(fit_rigid(&tri, &tri, Some(&[1.0, -1.0, 1.0])).is_err());
    }

    #[test]
    fn rotation_only_about_random_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let axis = Unit::new_normalize(Vector3::new(0.3, -0.5, 0.81));
        let truth = RigidTransform::from_axis_angle(axis, 1.1);
        let src: Vec<Point3> = (0..50)
            .map(|_| {
                pt(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(*p)).collect();
        let est = fit_rigid(&src, &dst, None).unwrap();
        assert!(est.rotation_angle_to(&truth) < 1e-9);
    }
}
