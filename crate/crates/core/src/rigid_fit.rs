//! Robust rigid estimation: RANSAC over a correspondence set with mandatory
//! junction anchors, and point-to-point ICP refinement against a spatial
//! index. Both are deterministic given their seeds and inputs.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::correspondence::CorrespondenceSet;
use crate::geometry::{fit_rigid, Point3, PointCloud, RigidTransform, SpatialIndex};

/// Correspondences per RANSAC model hypothesis.
pub const RANSAC_SAMPLE_SIZE: usize = 3;
/// Inlier ratio beyond which RANSAC attempts a stability-checked early exit.
const EARLY_EXIT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Residual (meters) below which a correspondence supports a model.
    pub inlier_threshold: f64,
    /// Fixed at 3; kept for config mirroring.
    pub sample_size: usize,
    pub min_inlier_count: usize,
    pub rng_seed: u64,
    /// Least-squares weight of each anchor in the final refit.
    pub anchor_weight: f64,
}

impl RansacParams {
    pub fn with_threshold(inlier_threshold: f64) -> Self {
        Self {
            max_iterations: 2000,
            inlier_threshold,
            sample_size: RANSAC_SAMPLE_SIZE,
            min_inlier_count: 4,
            rng_seed: 0,
            anchor_weight: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Relative RMSE change below which iteration stops.
    pub convergence_eps: f64,
    /// Pairs farther than this are dropped each iteration.
    pub max_pair_distance: f64,
}

impl IcpParams {
    pub fn with_max_pair_distance(max_pair_distance: f64) -> Self {
        Self {
            max_iterations: 50,
            convergence_eps: 1e-6,
            max_pair_distance,
        }
    }
}

/// Outcome of a robust fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub transform: RigidTransform,
    /// For RANSAC: indices into the input correspondence set supporting the
    /// final transform. For ICP: moving-point ids retained in the final
    /// pairing.
    pub inlier_ids: Vec<usize>,
    pub rmse: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Error)]
pub enum RigidFitError {
    #[error("need at least 3 correspondences plus anchors, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("no consensus: best support {best} below minimum {min}")]
    NoConsensus { best: usize, min: usize },
    #[error("no point pairs within the maximum pair distance")]
    NoPairs,
}

/// RANSAC rigid fit over `corrs`, with `anchors` — (moving point, pinned
/// position) pairs — scored against every hypothesis and always included in
/// the final weighted refit.
pub fn ransac_rigid(
    corrs: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    anchors: &[(Point3, Point3)],
    params: &RansacParams,
) -> Result<FitReport, RigidFitError> {
    let n = corrs.len();
    let m = anchors.len();
    if n + m < RANSAC_SAMPLE_SIZE {
        return Err(RigidFitError::InsufficientCorrespondences(n + m));
    }

    // Pooled (moving, fixed) pairs: correspondences first, anchors after.
    let pool: Vec<(Point3, Point3)> = corrs
        .iter()
        .map(|c| (source.point(c.src_id), target.point(c.dst_id)))
        .chain(anchors.iter().copied())
        .collect();

    let threshold = params.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    // Hypotheses are drawn from the correspondences; anchors only join the
    // sampling pool when correspondences alone cannot form one.
    let sample_domain = if n >= RANSAC_SAMPLE_SIZE { n } else { n + m };

    struct Candidate {
        support: usize,
        rmse: f64,
        transform: RigidTransform,
        corr_inliers: Vec<usize>,
    }
    let mut best: Option<Candidate> = None;
    let mut iterations_used = 0;

    for _ in 0..params.max_iterations.max(1) {
        iterations_used += 1;
        let sample = index::sample(&mut rng, sample_domain, RANSAC_SAMPLE_SIZE);
        let src: Vec<Point3> = sample.iter().map(|i| pool[i].0).collect();
        let dst: Vec<Point3> = sample.iter().map(|i| pool[i].1).collect();
        let Ok(model) = fit_rigid(&src, &dst, None) else {
            continue; // degenerate sample
        };

        let (support, rmse, corr_inliers) = score(&pool, n, &model, threshold);
        let better = match &best {
            None => true,
            Some(b) => support > b.support || (support == b.support && rmse < b.rmse),
        };
        if better {
            best = Some(Candidate { support, rmse, transform: model, corr_inliers });
        }

        // Early exit: a dominant model whose refit reproduces its own inlier
        // set is final; the rule is deterministic, so results are unchanged.
        if let Some(b) = &best {
            if b.support as f64 > EARLY_EXIT_RATIO * pool.len() as f64 {
                if let Some(refit) = refit(&pool, n, &b.corr_inliers, anchors, params) {
                    let (support, _, corr_inliers) = score(&pool, n, &refit, threshold);
                    if corr_inliers == b.corr_inliers && support >= b.support {
                        break;
                    }
                }
            }
        }
    }

    let best = best.ok_or(RigidFitError::NoConsensus { best: 0, min: params.min_inlier_count })?;
    if best.support < params.min_inlier_count {
        return Err(RigidFitError::NoConsensus {
            best: best.support,
            min: params.min_inlier_count,
        });
    }

    let final_transform = refit(&pool, n, &best.corr_inliers, anchors, params)
        .unwrap_or(best.transform);
    let (_, _, corr_inliers) = score(&pool, n, &final_transform, threshold);
    let rmse = if corr_inliers.is_empty() {
        rms_over(&pool[n..], &final_transform)
    } else {
        rms_over_ids(&pool, &corr_inliers, &final_transform)
    };
    Ok(FitReport {
        transform: final_transform,
        inlier_ids: corr_inliers,
        rmse,
        iterations_used,
    })
}

/// Support count (inlier correspondences + in-threshold anchors), RMSE over
/// the supporting residuals, and the correspondence inlier ids.
fn score(
    pool: &[(Point3, Point3)],
    corr_count: usize,
    model: &RigidTransform,
    threshold: f64,
) -> (usize, f64, Vec<usize>) {
    let mut corr_inliers = Vec::new();
    let mut support = 0usize;
    let mut sum_sq = 0.0;
    for (i, (moving, fixed)) in pool.iter().enumerate() {
        let r2 = (model.apply_point(*moving) - fixed).norm_squared();
        if r2 <= threshold * threshold {
            support += 1;
            sum_sq += r2;
            if i < corr_count {
                corr_inliers.push(i);
            }
        }
    }
    let rmse = if support > 0 { (sum_sq / support as f64).sqrt() } else { f64::INFINITY };
    (support, rmse, corr_inliers)
}

/// Weighted refit over the inlier correspondences plus every anchor.
fn refit(
    pool: &[(Point3, Point3)],
    corr_count: usize,
    corr_inliers: &[usize],
    anchors: &[(Point3, Point3)],
    params: &RansacParams,
) -> Option<RigidTransform> {
    let mut src = Vec::with_capacity(corr_inliers.len() + anchors.len());
    let mut dst = Vec::with_capacity(corr_inliers.len() + anchors.len());
    let mut weights = Vec::with_capacity(corr_inliers.len() + anchors.len());
    for &i in corr_inliers {
        src.push(pool[i].0);
        dst.push(pool[i].1);
        weights.push(1.0);
    }
    for &(moving, fixed) in &pool[corr_count..] {
        src.push(moving);
        dst.push(fixed);
        weights.push(params.anchor_weight);
    }
    fit_rigid(&src, &dst, Some(&weights)).ok()
}

fn rms_over(pairs: &[(Point3, Point3)], t: &RigidTransform) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|(a, b)| (t.apply_point(*a) - b).norm_squared())
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

fn rms_over_ids(pool: &[(Point3, Point3)], ids: &[usize], t: &RigidTransform) -> f64 {
    let sum: f64 = ids
        .iter()
        .map(|&i| (t.apply_point(pool[i].0) - pool[i].1).norm_squared())
        .sum();
    (sum / ids.len() as f64).sqrt()
}

/// Point-to-point ICP of `moving` against `target_index`, starting from
/// `init`. Returns the absolute transform (init included).
///
/// Each iteration pairs every moving point with its nearest target point,
/// drops pairs beyond `max_pair_distance`, and refits. An iteration whose
/// post-refit RMSE would exceed the previously accepted RMSE is rejected
/// and iteration stops, so the per-iteration RMSE sequence is non-increasing.
pub fn icp(
    moving: &PointCloud,
    target_index: &SpatialIndex,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<FitReport, RigidFitError> {
    icp_with_observer(moving, target_index, init, params, |_, _| {})
}

/// [`icp`] with a per-iteration callback `(iteration, accepted_rmse)`,
/// useful for monitoring convergence.
pub fn icp_with_observer(
    moving: &PointCloud,
    target_index: &SpatialIndex,
    init: &RigidTransform,
    params: &IcpParams,
    mut observer: impl FnMut(usize, f64),
) -> Result<FitReport, RigidFitError> {
    if moving.is_empty() {
        return Err(RigidFitError::NoPairs);
    }
    let max_d2 = params.max_pair_distance * params.max_pair_distance;

    let mut current = *init;
    let mut current_rmse = f64::INFINITY;
    let mut retained: Vec<usize> = Vec::new();
    let mut iterations_used = 0;

    for iteration in 1..=params.max_iterations.max(1) {
        // Pair under the current estimate.
        let mut pair_ids = Vec::new();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (i, p) in moving.points().iter().enumerate() {
            let moved = current.apply_point(*p);
            let (j, d) = target_index.nearest(moved);
            if d * d <= max_d2 {
                pair_ids.push(i);
                src.push(*p);
                dst.push(target_index.points()[j]);
            }
        }
        if pair_ids.is_empty() {
            if iteration == 1 {
                return Err(RigidFitError::NoPairs);
            }
            break;
        }

        let Ok(candidate) = fit_rigid(&src, &dst, None) else {
            // Too few or degenerate pairs; keep the current estimate.
            if iteration == 1 {
                // Even the initial pairing cannot support a refit: report the
                // pairing RMSE under the initial transform.
                retained = pair_ids;
                current_rmse = rms_pairs(&src, &dst, &current);
                iterations_used = 1;
                observer(iteration, current_rmse);
            }
            break;
        };
        let candidate_rmse = rms_pairs(&src, &dst, &candidate);
        if candidate_rmse > current_rmse {
            break; // monotone acceptance
        }
        let previous_rmse = current_rmse;
        current = candidate;
        current_rmse = candidate_rmse;
        retained = pair_ids;
        iterations_used = iteration;
        observer(iteration, current_rmse);

        if previous_rmse.is_finite() {
            let denom = previous_rmse.max(f64::EPSILON);
            if (previous_rmse - current_rmse) / denom < params.convergence_eps {
                break;
            }
        }
    }

    if retained.is_empty() {
        // max_iterations ≥ 1 guarantees at least one pairing attempt above.
        return Err(RigidFitError::NoPairs);
    }
    Ok(FitReport {
        transform: current,
        inlier_ids: retained,
        rmse: current_rmse,
        iterations_used,
    })
}

fn rms_pairs(src: &[Point3], dst: &[Point3], t: &RigidTransform) -> f64 {
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(a, b)| (t.apply_point(*a) - b).norm_squared())
        .sum();
    (sum / src.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{Correspondence, CorrespondenceSet};
    use nalgebra::Vector3;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    fn truth_transform() -> RigidTransform {
        RigidTransform::rotation_about_axis(
            Point3::new(0.2, -0.1, 0.4),
            nalgebra::Unit::new_normalize(Vector3::new(0.3, 1.0, -0.2)),
            0.7,
        )
    }

    fn identity_corrs(n: usize) -> CorrespondenceSet {
        CorrespondenceSet::from_vec(
            (0..n)
                .map(|i| Correspondence { src_id: i, dst_id: i, confidence: 1.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_correspondences_recover_the_transform() {
        let source = random_cloud(120, 1);
        let truth = truth_transform();
        let target = truth.apply_cloud(&source);
        let corrs = identity_corrs(120);
        let report = ransac_rigid(
            &corrs,
            &source,
            &target,
            &[],
            &RansacParams::with_threshold(0.05),
        )
        .unwrap();
        assert!((report.transform.rotation() - truth.rotation()).norm() < 1e-9);
        assert!((report.transform.translation() - truth.translation()).norm() < 1e-9);
        assert_eq!(report.inlier_ids.len(), 120);
    }

    #[test]
    fn forty_percent_outliers_are_rejected() {
        let source = random_cloud(200, 2);
        let truth = truth_transform();
        let target = truth.apply_cloud(&source);

        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut items: Vec<Correspondence> = (0..200)
            .map(|i| Correspondence { src_id: i, dst_id: i, confidence: 1.0 })
            .collect();
        let outliers = index::sample(&mut rng, 200, 80);
        for pick in outliers.iter() {
            let mut wrong = rng.random_range(0..200);
            while wrong == pick {
                wrong = rng.random_range(0..200);
            }
            items[pick].dst_id = wrong;
        }
        let true_ids: Vec<usize> = (0..200)
            .filter(|i| items[*i].dst_id == *i)
            .collect();
        let corrs = CorrespondenceSet::from_vec(items).unwrap();

        let params = RansacParams { rng_seed: 7, ..RansacParams::with_threshold(0.02) };
        let report = ransac_rigid(&corrs, &source, &target, &[], &params).unwrap();
        assert!((report.transform.rotation() - truth.rotation()).norm() < 1e-3);

        let found: std::collections::BTreeSet<usize> = report.inlier_ids.iter().copied().collect();
        let recovered = true_ids.iter().filter(|i| found.contains(i)).count();
        assert!(
            recovered as f64 >= 0.95 * true_ids.len() as f64,
            "recovered {recovered} of {}",
            true_ids.len()
        );
    }

    #[test]
    fn too_few_correspondences_fail_fast() {
        let source = random_cloud(5, 3);
        let target = source.clone();
        let corrs = identity_corrs(2);
        assert!(matches!(
            ransac_rigid(&corrs, &source, &target, &[], &RansacParams::with_threshold(0.1)),
            Err(RigidFitError::InsufficientCorrespondences(2))
        ));
    }

    #[test]
    fn anchors_veto_a_contradictory_pull() {
        // All correspondences pull the points far along +x; anchors pin three
        // positions in place. Either no consensus forms, or the winning model
        // keeps the anchors within threshold.
        let source = random_cloud(30, 4);
        let shifted = RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0));
        let target = shifted.apply_cloud(&source);
        let corrs = identity_corrs(30);
        let anchors: Vec<(Point3, Point3)> = vec![
            (Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 0.0)),
            (Point3::new(1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)),
            (Point3::new(0.0, 1.0, 0.0), Point3::new(0.0, 1.0, 0.0)),
            (Point3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 1.0)),
        ];
        let params = RansacParams {
            min_inlier_count: 32,
            ..RansacParams::with_threshold(0.05)
        };
        match ransac_rigid(&corrs, &source, &target, &anchors, &params) {
            Err(RigidFitError::NoConsensus { best, min }) => {
                assert!(best < min);
            }
            Ok(report) => {
                for (moving, fixed) in &anchors {
                    let r = (report.transform.apply_point(*moving) - fixed).norm();
                    assert!(r <= params.inlier_threshold);
                }
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn anchor_positions_influence_the_refit() {
        let source = random_cloud(50, 5);
        let target = source.clone();
        let corrs = identity_corrs(50);
        let anchor_point = Point3::new(0.5, 0.5, 0.5);
        let params = RansacParams::with_threshold(0.3);

        let base = ransac_rigid(
            &corrs,
            &source,
            &target,
            &[(anchor_point, anchor_point)],
            &params,
        )
        .unwrap();
        let nudged = ransac_rigid(
            &corrs,
            &source,
            &target,
            &[(anchor_point, anchor_point + Vector3::new(0.2, 0.0, 0.0))],
            &params,
        )
        .unwrap();
        let delta = (base.transform.translation() - nudged.transform.translation()).norm();
        assert!(delta > 1e-6, "anchor nudge had no effect ({delta})");
    }

    #[test]
    fn ransac_is_deterministic() {
        let source = random_cloud(100, 6);
        let truth = truth_transform();
        let target = truth.apply_cloud(&source);
        let corrs = identity_corrs(100);
        let params = RansacParams { rng_seed: 11, ..RansacParams::with_threshold(0.02) };
        let a = ransac_rigid(&corrs, &source, &target, &[], &params).unwrap();
        let b = ransac_rigid(&corrs, &source, &target, &[], &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn icp_on_aligned_clouds_returns_init() {
        let cloud = random_cloud(200, 8);
        let index = SpatialIndex::build(&cloud).unwrap();
        let report = icp(
            &cloud,
            &index,
            &RigidTransform::identity(),
            &IcpParams::with_max_pair_distance(0.5),
        )
        .unwrap();
        assert!(report.rmse < 1e-12);
        assert!(report.iterations_used <= 2);
        assert!((report.transform.rotation() - RigidTransform::identity().rotation()).norm() < 1e-9);
    }

    #[test]
    fn icp_recovers_a_five_degree_rotation() {
        // Dense box-surface cloud so nearest-neighbor pairing is informative.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3> = (0..5000)
            .map(|_| {
                let face = rng.random_range(0..6u8);
                let u: f64 = rng.random_range(-0.5..0.5);
                let v: f64 = rng.random_range(-0.5..0.5);
                match face {
                    0 => Point3::new(-0.5, u, v),
                    1 => Point3::new(0.5, u, v),
                    2 => Point3::new(u, -0.5, v),
                    3 => Point3::new(u, 0.5, v),
                    4 => Point3::new(u, v, -0.5),
                    _ => Point3::new(u, v, 0.5),
                }
            })
            .collect();
        let moving = PointCloud::new(pts).unwrap();
        let truth = RigidTransform::from_axis_angle(Vector3::z_axis(), 5f64.to_radians());
        let target = truth.apply_cloud(&moving);
        let index = SpatialIndex::build(&target).unwrap();

        let report = icp(
            &moving,
            &index,
            &RigidTransform::identity(),
            &IcpParams { max_iterations: 100, ..IcpParams::with_max_pair_distance(0.5) },
        )
        .unwrap();
        let err_deg = report.transform.rotation_angle_to(&truth).to_degrees();
        assert!(err_deg < 0.1, "rotation error {err_deg}°");
    }

    #[test]
    fn icp_far_away_finds_no_pairs() {
        let cloud = random_cloud(50, 10);
        let index = SpatialIndex::build(&cloud).unwrap();
        let far = RigidTransform::from_translation(Vector3::new(1000.0, 0.0, 0.0));
        assert!(matches!(
            icp(&cloud, &index, &far, &IcpParams::with_max_pair_distance(0.5)),
            Err(RigidFitError::NoPairs)
        ));
    }

    #[test]
    fn icp_rmse_is_non_increasing() {
        let moving = random_cloud(500, 12);
        let truth = RigidTransform::from_axis_angle(Vector3::y_axis(), 0.05);
        let target = truth.apply_cloud(&moving);
        let index = SpatialIndex::build(&target).unwrap();
        let mut history = Vec::new();
        icp_with_observer(
            &moving,
            &index,
            &RigidTransform::identity(),
            &IcpParams::with_max_pair_distance(1.0),
            |_, rmse| history.push(rmse),
        )
        .unwrap();
        assert!(!history.is_empty());
        for pair in history.windows(2) {
            assert!(pair[1] <= pair[0], "rmse increased: {pair:?}");
        }
    }
}
