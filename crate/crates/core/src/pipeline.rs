//! End-to-end part-wise registration: whole-body rigid fit, then per-part
//! tuning in decreasing size order with RoI restriction, junction anchors,
//! skip rules and ICP refinement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::{
    correspondences_for_part, match_clouds, validate_density, CorrespondenceSet, DensityEntry,
    MatchError, MatcherConfig,
};
use crate::geometry::{aabb_of, Aabb, Point3, PointCloud, RigidTransform, SpatialIndex};
use crate::graph::{
    build_graph, joint_intact_with, larger_neighbor, part_order, GraphError, Part, PartGraph,
    PartId,
};
use crate::rigid_fit::{icp, ransac_rigid, FitReport, IcpParams, RansacParams, RigidFitError};
use crate::synthetic::PointProvenance;

/// What to do when the per-part density check flags a part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityPolicy {
    Warn,
    Abort,
}

/// RANSAC knobs with data-dependent defaults left open: a `None` threshold
/// resolves to 2 × the graph's adjacency delta.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub inlier_threshold: Option<f64>,
    pub min_inlier_count: usize,
    pub rng_seed: u64,
    pub anchor_weight: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            inlier_threshold: None,
            min_inlier_count: 4,
            rng_seed: 0,
            anchor_weight: 3.0,
        }
    }
}

/// ICP knobs; a `None` pair distance resolves to 3 × the inlier threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    pub convergence_eps: f64,
    pub max_pair_distance: Option<f64>,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_eps: 1e-6,
            max_pair_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Below this many correspondences a part skips RANSAC.
    pub min_corr_per_part: usize,
    /// Density check threshold (per part, source and target RoI).
    pub min_points_per_part: usize,
    /// Joint-break tolerance; `None` resolves to 3 × adjacency delta.
    pub tau_joint: Option<f64>,
    /// RoI expansion; `None` resolves to the adjacency delta.
    pub roi_margin: Option<f64>,
    /// Minimum fraction of a part's points that must pair during an ICP-only
    /// adjustment for the result to be accepted.
    pub icp_only_min_coverage: f64,
    pub ransac: RansacConfig,
    pub icp: IcpConfig,
    pub density_violation_policy: DensityPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_corr_per_part: 5,
            min_points_per_part: 50,
            tau_joint: None,
            roi_margin: None,
            icp_only_min_coverage: 0.5,
            ransac: RansacConfig::default(),
            icp: IcpConfig::default(),
            density_violation_policy: DensityPolicy::Warn,
        }
    }
}

/// Concrete parameter set after data-dependent defaults are resolved against
/// the part graph's adjacency delta.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub min_corr_per_part: usize,
    pub min_points_per_part: usize,
    pub tau_joint: f64,
    pub roi_margin: f64,
    pub icp_only_min_coverage: f64,
    pub ransac: RansacParams,
    pub icp: IcpParams,
    pub density_violation_policy: DensityPolicy,
}

impl PipelineConfig {
    pub fn resolve(&self, adjacency_delta: f64) -> ResolvedConfig {
        let inlier_threshold = self
            .ransac
            .inlier_threshold
            .unwrap_or(2.0 * adjacency_delta);
        ResolvedConfig {
            min_corr_per_part: self.min_corr_per_part,
            min_points_per_part: self.min_points_per_part,
            tau_joint: self.tau_joint.unwrap_or(3.0 * adjacency_delta),
            roi_margin: self.roi_margin.unwrap_or(adjacency_delta),
            icp_only_min_coverage: self.icp_only_min_coverage,
            ransac: RansacParams {
                max_iterations: self.ransac.max_iterations,
                inlier_threshold,
                sample_size: crate::rigid_fit::RANSAC_SAMPLE_SIZE,
                min_inlier_count: self.ransac.min_inlier_count,
                rng_seed: self.ransac.rng_seed,
                anchor_weight: self.ransac.anchor_weight,
            },
            icp: IcpParams {
                max_iterations: self.icp.max_iterations,
                convergence_eps: self.icp.convergence_eps,
                max_pair_distance: self
                    .icp
                    .max_pair_distance
                    .unwrap_or(3.0 * inlier_threshold),
            },
            density_violation_policy: self.density_violation_policy,
        }
    }
}

/// Outcome of tuning one part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartStatus {
    /// RANSAC + ICP adjustment applied.
    Adjusted,
    /// No usable adjustment; the part keeps its prior placement bit-for-bit.
    SkippedFewCorrespondences,
    /// A candidate adjustment broke a joint and was discarded.
    SkippedJointBreak,
    /// Too few correspondences for RANSAC; an ICP-only adjustment was applied.
    SkippedRansacIcpOnly,
    /// RANSAC found no consensus; the part keeps its prior placement.
    FailedNoConsensus,
}

impl PartStatus {
    /// True when the status guarantees the prior placement was kept.
    pub fn keeps_prior_placement(self) -> bool {
        matches!(
            self,
            PartStatus::SkippedFewCorrespondences
                | PartStatus::SkippedJointBreak
                | PartStatus::FailedNoConsensus
        )
    }
}

impl std::fmt::Display for PartStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PartStatus::Adjusted => "adjusted",
            PartStatus::SkippedFewCorrespondences => "skipped_few_correspondences",
            PartStatus::SkippedJointBreak => "skipped_joint_break",
            PartStatus::SkippedRansacIcpOnly => "skipped_ransac_icp_only",
            PartStatus::FailedNoConsensus => "failed_no_consensus",
        };
        f.write_str(s)
    }
}

/// Per-part numbers worth reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PartDiagnostics {
    pub correspondence_count: usize,
    pub roi: Option<Aabb>,
    pub rmse: Option<f64>,
    pub inlier_count: Option<usize>,
}

/// Full registration outcome: absolute source→target transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub global_transform: RigidTransform,
    pub global_rmse: f64,
    pub global_inlier_count: usize,
    /// Indexed by part id.
    pub part_transforms: Vec<RigidTransform>,
    pub part_status: Vec<PartStatus>,
    pub diagnostics: Vec<PartDiagnostics>,
    pub density: Vec<DensityEntry>,
    pub adjacency_delta: f64,
    pub tau_joint: f64,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("whole-body fit failed: {0}")]
    WholeBody(RigidFitError),
    #[error("{0} parts below the density minimum (abort policy)")]
    DensityAbort(usize),
}

/// Initial single rigid alignment of the whole source to the target:
/// RANSAC over all correspondences (no anchors), then full-cloud ICP.
pub fn whole_body_fit(
    source: &PointCloud,
    target: &PointCloud,
    target_index: &SpatialIndex,
    corrs: &CorrespondenceSet,
    cfg: &ResolvedConfig,
) -> Result<FitReport, RigidFitError> {
    let coarse = ransac_rigid(corrs, source, target, &[], &cfg.ransac)?;
    let refined = icp(source, target_index, &coarse.transform, &cfg.icp)?;
    Ok(FitReport {
        transform: refined.transform,
        inlier_ids: coarse.inlier_ids,
        rmse: refined.rmse,
        iterations_used: coarse.iterations_used + refined.iterations_used,
    })
}

/// Region of interest for one part: the box around the globally-fitted part
/// points plus every target point its correspondences reference, expanded by
/// `margin`.
pub fn compute_roi(
    part: &Part,
    source_after_global: &PointCloud,
    corrs_for_part: &CorrespondenceSet,
    target: &PointCloud,
    margin: f64,
) -> Aabb {
    let mut pts: Vec<Point3> = part
        .point_ids
        .iter()
        .map(|&i| source_after_global.point(i))
        .collect();
    pts.extend(corrs_for_part.iter().map(|c| target.point(c.dst_id)));
    aabb_of(&pts, margin).expect("parts are non-empty")
}

/// Target restricted to a box, with ids mapped back to the full cloud.
struct RoiTarget {
    index: Option<SpatialIndex>,
}

fn crop_target(target: &PointCloud, roi: &Aabb) -> RoiTarget {
    let pts: Vec<Point3> = target
        .points()
        .iter()
        .filter(|p| roi.contains(**p))
        .copied()
        .collect();
    RoiTarget {
        index: if pts.is_empty() {
            None
        } else {
            Some(SpatialIndex::from_points(&pts).expect("non-empty"))
        },
    }
}

/// Decorrelates per-part seeds while keeping runs reproducible.
fn part_seed(base: u64, part: PartId) -> u64 {
    base ^ (part.0 as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Tunes one part given the current placements of every part. Returns the
/// new placement (prior placement on any skip), its status, and diagnostics.
///
/// Must be called in `part_order` sequence: anchors reference the current
/// placement of the larger neighbor, and the joint check runs against the
/// neighbors already settled (`settled`) — parts still waiting for their
/// turn get their own check later.
pub fn tune_part(
    p: PartId,
    placements: &[RigidTransform],
    settled: &[bool],
    g: &PartGraph,
    source: &PointCloud,
    source_after_global: &PointCloud,
    target: &PointCloud,
    corrs: &CorrespondenceSet,
    cfg: &ResolvedConfig,
) -> (RigidTransform, PartStatus, PartDiagnostics) {
    let part = g.part(p);
    let prior = placements[p.index()];
    let corrs_p = correspondences_for_part(corrs, part);
    let roi = compute_roi(part, source_after_global, &corrs_p, target, cfg.roi_margin);
    let mut diag = PartDiagnostics {
        correspondence_count: corrs_p.len(),
        roi: Some(roi),
        rmse: None,
        inlier_count: None,
    };

    let cropped = crop_target(target, &roi);
    let moving = source.select(&part.point_ids);

    if corrs_p.len() < cfg.min_corr_per_part {
        // Too few correspondences: skip RANSAC, attempt ICP alone inside the
        // RoI from the current (global) placement.
        let Some(roi_index) = &cropped.index else {
            return (prior, PartStatus::SkippedFewCorrespondences, diag);
        };
        return match icp(&moving, roi_index, &prior, &cfg.icp) {
            Err(_) => (prior, PartStatus::SkippedFewCorrespondences, diag),
            Ok(report) => {
                let coverage = report.inlier_ids.len() as f64 / part.size() as f64;
                if coverage < cfg.icp_only_min_coverage {
                    return (prior, PartStatus::SkippedFewCorrespondences, diag);
                }
                let intact = joint_intact_with(
                    g,
                    source,
                    p,
                    &report.transform,
                    placements,
                    cfg.tau_joint,
                    |q| settled[q.index()],
                );
                if !intact {
                    return (prior, PartStatus::SkippedJointBreak, diag);
                }
                diag.rmse = Some(report.rmse);
                diag.inlier_count = Some(report.inlier_ids.len());
                (report.transform, PartStatus::SkippedRansacIcpOnly, diag)
            }
        };
    }

    // RANSAC restricted to correspondences whose target point lies in the RoI.
    let corrs_roi = CorrespondenceSet::from_vec(
        corrs_p
            .iter()
            .filter(|c| roi.contains(target.point(c.dst_id)))
            .copied()
            .collect(),
    )
    .expect("subset of a valid set");

    // Junction anchors against the larger neighbor, pinned at the neighbor's
    // current placement.
    let anchors: Vec<(Point3, Point3)> = match larger_neighbor(g, p) {
        None => Vec::new(),
        Some(q) => {
            let junction = g.junction_between(p, q).expect("larger neighbor is adjacent");
            let q_placement = &placements[q.index()];
            junction
                .anchors_of(p)
                .expect("junction of p")
                .iter()
                .map(|&a| {
                    let rest = source.point(a);
                    (rest, q_placement.apply_point(rest))
                })
                .collect()
        }
    };

    let mut ransac_params = cfg.ransac.clone();
    ransac_params.rng_seed = part_seed(cfg.ransac.rng_seed, p);
    let coarse = match ransac_rigid(&corrs_roi, source, target, &anchors, &ransac_params) {
        Ok(r) => r,
        Err(_) => return (prior, PartStatus::FailedNoConsensus, diag),
    };
    diag.inlier_count = Some(coarse.inlier_ids.len());
    diag.rmse = Some(coarse.rmse);

    let candidate = match &cropped.index {
        Some(roi_index) => match icp(&moving, roi_index, &coarse.transform, &cfg.icp) {
            Ok(refined) => {
                diag.rmse = Some(refined.rmse);
                refined.transform
            }
            Err(_) => coarse.transform,
        },
        None => coarse.transform,
    };

    let intact = joint_intact_with(g, source, p, &candidate, placements, cfg.tau_joint, |q| {
        settled[q.index()]
    });
    if !intact {
        return (prior, PartStatus::SkippedJointBreak, diag);
    }
    (candidate, PartStatus::Adjusted, diag)
}

/// Full pipeline with externally supplied correspondences.
pub fn register_with_correspondences(
    source: &PointCloud,
    labels: &[PartId],
    target: &PointCloud,
    corrs: &CorrespondenceSet,
    cfg: &PipelineConfig,
) -> Result<RegistrationResult, PipelineError> {
    let g = build_graph(source, labels, None)?;
    let resolved = cfg.resolve(g.adjacency_delta());

    let target_index = SpatialIndex::build(target).map_err(GraphError::Geometry)?;
    let whole = whole_body_fit(source, target, &target_index, corrs, &resolved)
        .map_err(PipelineError::WholeBody)?;
    let global = whole.transform;

    let density = validate_density(&g, source, target, &global, resolved.min_points_per_part);
    let flagged = density.iter().filter(|e| e.flagged).count();
    if flagged > 0 {
        match resolved.density_violation_policy {
            DensityPolicy::Abort => return Err(PipelineError::DensityAbort(flagged)),
            DensityPolicy::Warn => {
                for e in density.iter().filter(|e| e.flagged) {
                    log::warn!(
                        "part {} below density minimum: {} source points, {} target points in RoI",
                        e.part,
                        e.source_count,
                        e.target_roi_count
                    );
                }
            }
        }
    }

    let source_after_global = global.apply_cloud(source);
    let mut placements = vec![global; g.part_count()];
    let mut statuses = vec![PartStatus::Adjusted; g.part_count()];
    let mut diagnostics: Vec<Option<PartDiagnostics>> = vec![None; g.part_count()];
    let mut settled = vec![false; g.part_count()];

    let order = part_order(&g);
    for &p in &order {
        let (transform, status, diag) = tune_part(
            p,
            &placements,
            &settled,
            &g,
            source,
            &source_after_global,
            target,
            corrs,
            &resolved,
        );
        placements[p.index()] = transform;
        statuses[p.index()] = status;
        diagnostics[p.index()] = Some(diag);
        settled[p.index()] = true;
    }

    reconcile_joints(&g, source, &global, &order, &mut placements, &mut statuses, resolved.tau_joint);

    Ok(RegistrationResult {
        global_transform: global,
        global_rmse: whole.rmse,
        global_inlier_count: whole.inlier_ids.len(),
        part_transforms: placements,
        part_status: statuses,
        diagnostics: diagnostics.into_iter().map(|d| d.expect("all parts tuned")).collect(),
        density,
        adjacency_delta: g.adjacency_delta(),
        tau_joint: resolved.tau_joint,
    })
}

/// Final non-disintegration sweep. A part whose adjustment was accepted can
/// still end up across a too-wide gap from a neighbor that failed to follow
/// (skipped or occluded). Reverting the offending adjustment to the global
/// placement restores the rest configuration of that joint; the all-global
/// configuration is always gap-free, so this terminates.
fn reconcile_joints(
    g: &PartGraph,
    source: &PointCloud,
    global: &RigidTransform,
    order: &[PartId],
    placements: &mut [RigidTransform],
    statuses: &mut [PartStatus],
    tau_joint: f64,
) {
    let order_rank = |p: PartId| order.iter().position(|&q| q == p).expect("part in order");
    loop {
        let violation = crate::graph::max_junction_gaps(g, source, placements)
            .into_iter()
            .find(|&(_, _, gap)| gap > tau_joint);
        let Some((a, b, _)) = violation else {
            return;
        };
        let moved = |p: PartId| !statuses[p.index()].keeps_prior_placement();
        let revert = match (moved(a), moved(b)) {
            (true, false) => a,
            (false, true) => b,
            // Both adjusted: undo the one tuned later.
            (true, true) => {
                if order_rank(a) > order_rank(b) {
                    a
                } else {
                    b
                }
            }
            // Two un-moved parts sit at the global placement: the joint is in
            // its rest configuration, wider than tau only when tau was
            // configured below the adjacency delta. Nothing left to revert.
            (false, false) => return,
        };
        placements[revert.index()] = *global;
        statuses[revert.index()] = PartStatus::SkippedJointBreak;
    }
}

/// Full pipeline: graph construction, matching, whole-body fit, density
/// check, per-part tuning. Deterministic given the seeds in the configs.
pub fn register(
    source: &PointCloud,
    labels: &[PartId],
    target: &PointCloud,
    matcher: &MatcherConfig,
    provenance: Option<&[PointProvenance]>,
    cfg: &PipelineConfig,
) -> Result<RegistrationResult, PipelineError> {
    let corrs = match_clouds(source, target, matcher, provenance)?;
    register_with_correspondences(source, labels, target, &corrs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{Correspondence, MatcherVariant};
    use crate::geometry::nn_rmse;
    use crate::graph::max_junction_gaps;
    use crate::synthetic::{articulate, degrade, generate, three_part_arm, DegradationSpec};
    use nalgebra::Vector3;

    fn oracle_cfg(seed: u64) -> MatcherConfig {
        MatcherConfig {
            variant: MatcherVariant::Oracle,
            rng_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn identity_scene_registers_to_identity() {
        let spec = three_part_arm([900, 700, 500], 21);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) = articulate(
            &source,
            &labels,
            &spec,
            &[0.0, 0.0],
            &RigidTransform::identity(),
        )
        .unwrap();
        let result = register(
            &source,
            &labels,
            &target,
            &oracle_cfg(1),
            Some(&truth.provenance),
            &PipelineConfig::default(),
        )
        .unwrap();

        assert!((result.global_transform.rotation()
            - RigidTransform::identity().rotation())
        .norm()
            < 1e-9);
        assert!(result.global_transform.translation().norm() < 1e-9);
        for (t, s) in result.part_transforms.iter().zip(&result.part_status) {
            assert_eq!(*s, PartStatus::Adjusted);
            assert!(t.rotation_angle_to(&RigidTransform::identity()) < 1e-6);
            assert!(t.translation().norm() < 1e-6);
        }
    }

    #[test]
    fn hinged_scene_recovers_part_transforms() {
        let spec = three_part_arm([1500, 900, 700], 22);
        let (source, labels) = generate(&spec).unwrap();
        let global = RigidTransform::from_axis_angle(Vector3::y_axis(), 0.15);
        let (target, truth) = articulate(
            &source,
            &labels,
            &spec,
            &[20f64.to_radians(), 35f64.to_radians()],
            &global,
        )
        .unwrap();
        let result = register(
            &source,
            &labels,
            &target,
            &oracle_cfg(2),
            Some(&truth.provenance),
            &PipelineConfig::default(),
        )
        .unwrap();

        for part in 0..3 {
            assert_eq!(result.part_status[part], PartStatus::Adjusted, "part {part}");
            let err_deg = result.part_transforms[part]
                .rotation_angle_to(&truth.part_transforms[part])
                .to_degrees();
            assert!(err_deg < 0.01, "part {part}: rotation error {err_deg}°");
        }

        // Joints must survive the part-wise adjustment.
        let g = build_graph(&source, &labels, None).unwrap();
        for (a, b, gap) in max_junction_gaps(&g, &source, &result.part_transforms) {
            assert!(gap <= result.tau_joint, "junction {a}-{b} gap {gap}");
        }
    }

    #[test]
    fn part_wise_beats_whole_body_alone() {
        let spec = three_part_arm([1500, 900, 700], 23);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) = articulate(
            &source,
            &labels,
            &spec,
            &[20f64.to_radians(), 35f64.to_radians()],
            &RigidTransform::identity(),
        )
        .unwrap();
        let result = register(
            &source,
            &labels,
            &target,
            &oracle_cfg(3),
            Some(&truth.provenance),
            &PipelineConfig::default(),
        )
        .unwrap();

        let whole_body_only = result.global_transform.apply_cloud(&source);
        let mut per_part_points = Vec::with_capacity(source.len());
        for (i, p) in source.points().iter().enumerate() {
            per_part_points.push(result.part_transforms[labels[i].index()].apply_point(*p));
        }
        let per_part = PointCloud::new(per_part_points).unwrap();

        let rmse_global = nn_rmse(&whole_body_only, &target).unwrap();
        let rmse_parts = nn_rmse(&per_part, &target).unwrap();
        assert!(
            rmse_parts <= 0.5 * rmse_global,
            "parts {rmse_parts} vs global {rmse_global}"
        );
    }

    #[test]
    fn occluded_part_is_skipped_and_keeps_the_global_transform() {
        let spec = three_part_arm([1500, 900, 700], 24);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) =
            articulate(&source, &labels, &spec, &[0.0, 0.0], &RigidTransform::identity()).unwrap();

        // Remove part 2 from the target entirely.
        let keep: Vec<usize> = (0..target.len())
            .filter(|&i| match truth.provenance[i] {
                PointProvenance::Source(s) => labels[s] != PartId(2),
                PointProvenance::Outlier => true,
            })
            .collect();
        let occluded = target.select(&keep);
        let provenance: Vec<PointProvenance> =
            keep.iter().map(|&i| truth.provenance[i]).collect();

        let result = register(
            &source,
            &labels,
            &occluded,
            &oracle_cfg(4),
            Some(&provenance),
            &PipelineConfig::default(),
        )
        .unwrap();

        assert!(
            matches!(
                result.part_status[2],
                PartStatus::SkippedFewCorrespondences | PartStatus::SkippedRansacIcpOnly
            ),
            "status {:?}",
            result.part_status[2]
        );
        // The occluded part must ride along with the global fit, bit-exact.
        assert_eq!(result.part_transforms[2], result.global_transform);
        assert_eq!(result.part_status[0], PartStatus::Adjusted);
        assert_eq!(result.part_status[1], PartStatus::Adjusted);
    }

    #[test]
    fn adversarial_outliers_cannot_break_a_joint() {
        let spec = three_part_arm([1500, 900, 700], 25);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) =
            articulate(&source, &labels, &spec, &[0.0, 0.0], &RigidTransform::identity()).unwrap();

        // Coherent adversarial correspondences: every match of part 2 points
        // at part 0's territory, one object-length away, consistently with a
        // rigid shift. RANSAC will happily reach consensus on the pull; the
        // joint check is what must stop it.
        let corrs_true = match_clouds(
            &source,
            &target,
            &oracle_cfg(5),
            Some(&truth.provenance),
        )
        .unwrap();
        let part0_source_ids: Vec<usize> =
            (0..source.len()).filter(|&i| labels[i] == PartId(0)).collect();
        let part0_points: Vec<Point3> =
            part0_source_ids.iter().map(|&i| source.point(i)).collect();
        let part0_index = SpatialIndex::from_points(&part0_points).unwrap();
        let mut target_of_source = vec![usize::MAX; source.len()];
        for (dst, prov) in truth.provenance.iter().enumerate() {
            if let PointProvenance::Source(s) = prov {
                target_of_source[*s] = dst;
            }
        }
        let pull = Vector3::new(-1.0, 0.0, 0.0);
        let mut items: Vec<Correspondence> = Vec::new();
        for c in corrs_true.iter() {
            if labels[c.src_id] == PartId(2) {
                let (k, _) = part0_index.nearest(source.point(c.src_id) + pull);
                items.push(Correspondence {
                    src_id: c.src_id,
                    dst_id: target_of_source[part0_source_ids[k]],
                    confidence: 1.0,
                });
            } else {
                items.push(*c);
            }
        }
        // The nearest-point snapping can map two sources onto one pair; keep
        // the first occurrence.
        let mut seen = std::collections::BTreeSet::new();
        items.retain(|c| seen.insert((c.src_id, c.dst_id)));
        let corrs = CorrespondenceSet::from_vec(items).unwrap();

        let result =
            register_with_correspondences(&source, &labels, &target, &corrs, &PipelineConfig::default())
                .unwrap();

        assert_eq!(result.part_status[2], PartStatus::SkippedJointBreak);
        assert_eq!(result.part_transforms[2], result.global_transform);

        let g = build_graph(&source, &labels, None).unwrap();
        for (a, b, gap) in max_junction_gaps(&g, &source, &result.part_transforms) {
            assert!(gap <= result.tau_joint, "junction {a}-{b} gap {gap}");
        }
    }

    #[test]
    fn register_is_deterministic() {
        let spec = three_part_arm([500, 400, 300], 26);
        let (source, labels) = generate(&spec).unwrap();
        let (clean, truth) = articulate(
            &source,
            &labels,
            &spec,
            &[0.2, -0.3],
            &RigidTransform::from_translation(Vector3::new(0.1, 0.0, 0.0)),
        )
        .unwrap();
        let (target, truth) = degrade(
            &clean,
            &truth,
            &DegradationSpec {
                noise_sigma: 0.002,
                keep_fraction: 0.8,
                outlier_points: 50,
                rng_seed: 9,
                ..Default::default()
            },
        )
        .unwrap();
        let matcher = MatcherConfig {
            variant: MatcherVariant::Oracle,
            oracle_outlier_fraction: 0.2,
            rng_seed: 13,
            ..Default::default()
        };
        let run = || {
            register(
                &source,
                &labels,
                &target,
                &matcher,
                Some(&truth.provenance),
                &PipelineConfig::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn two_correspondences_is_a_fatal_whole_body_error() {
        let spec = three_part_arm([300, 250, 200], 27);
        let (source, labels) = generate(&spec).unwrap();
        let corrs = CorrespondenceSet::from_vec(vec![
            Correspondence { src_id: 0, dst_id: 0, confidence: 1.0 },
            Correspondence { src_id: 1, dst_id: 1, confidence: 1.0 },
        ])
        .unwrap();
        let err = register_with_correspondences(
            &source,
            &labels,
            &source,
            &corrs,
            &PipelineConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PipelineError::WholeBody(RigidFitError::InsufficientCorrespondences(2))
        ));
    }

    #[test]
    fn density_abort_policy_is_fatal() {
        let spec = three_part_arm([1500, 900, 700], 28);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) =
            articulate(&source, &labels, &spec, &[0.0, 0.0], &RigidTransform::identity()).unwrap();
        // Strip part 2 from the target to trip the density check.
        let keep: Vec<usize> = (0..target.len())
            .filter(|&i| matches!(truth.provenance[i], PointProvenance::Source(s) if labels[s] != PartId(2)))
            .collect();
        let occluded = target.select(&keep);
        let provenance: Vec<PointProvenance> = keep.iter().map(|&i| truth.provenance[i]).collect();

        // The occluded part's RoI still catches the neighbor's contact patch,
        // so raise the minimum above that fringe to trip the policy.
        let cfg = PipelineConfig {
            density_violation_policy: DensityPolicy::Abort,
            min_points_per_part: 400,
            ..Default::default()
        };
        let err = register(
            &source,
            &labels,
            &occluded,
            &oracle_cfg(6),
            Some(&provenance),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::DensityAbort(n) if n >= 1));
    }

    #[test]
    fn roi_grows_to_cover_correspondence_targets() {
        let spec = three_part_arm([300, 250, 200], 29);
        let (source, labels) = generate(&spec).unwrap();
        let g = build_graph(&source, &labels, None).unwrap();
        let part = g.part(PartId(0));

        let far = Point3::new(5.0, 5.0, 5.0);
        let mut target_pts = source.points().to_vec();
        target_pts.push(far);
        let target = PointCloud::new(target_pts).unwrap();

        let empty = CorrespondenceSet::default();
        let roi_plain = compute_roi(part, &source, &empty, &target, 0.0);
        assert!(!roi_plain.contains(far));

        let with_far = CorrespondenceSet::from_vec(vec![Correspondence {
            src_id: part.point_ids[0],
            dst_id: target.len() - 1,
            confidence: 1.0,
        }])
        .unwrap();
        let roi = compute_roi(part, &source, &with_far, &target, 0.0);
        assert!(roi.contains(far));
        assert!(roi.contains_box(&roi_plain));
    }

    #[test]
    fn few_correspondence_part_never_runs_ransac() {
        // Part 2 gets exactly 2 correspondences (< min_corr_per_part = 5):
        // its status must be one of the two few-correspondence outcomes.
        let spec = three_part_arm([1500, 900, 700], 30);
        let (source, labels) = generate(&spec).unwrap();
        let (target, truth) =
            articulate(&source, &labels, &spec, &[0.0, 0.0], &RigidTransform::identity()).unwrap();
        let corrs_all = match_clouds(&source, &target, &oracle_cfg(7), Some(&truth.provenance)).unwrap();
        let mut part2_kept = 0;
        let items: Vec<Correspondence> = corrs_all
            .iter()
            .filter(|c| {
                if labels[c.src_id] == PartId(2) {
                    part2_kept += 1;
                    part2_kept <= 2
                } else {
                    true
                }
            })
            .copied()
            .collect();
        let corrs = CorrespondenceSet::from_vec(items).unwrap();
        let result =
            register_with_correspondences(&source, &labels, &target, &corrs, &PipelineConfig::default())
                .unwrap();
        assert!(matches!(
            result.part_status[2],
            PartStatus::SkippedRansacIcpOnly | PartStatus::SkippedFewCorrespondences
        ));
    }
}
