//! Part-wise rigid point cloud registration for articulated objects.
//!
//! Objects made of rigid parts that move about joints (doors, manipulators,
//! hinged machine covers) deform non-rigidly as a whole while every part
//! stays rigid. This crate registers such objects part by part: it builds a
//! part-whole adjacency graph over the labeled source cloud, matches points
//! against the target, fits one whole-body rigid transform, then tunes each
//! part in decreasing size order — RANSAC with junction anchors, ICP
//! refinement inside a per-part region of interest, and joint-integrity
//! checks that reject any adjustment that would pull the object apart.
//!
//! Module map:
//! - [`geometry`]: points, clouds, rigid transforms, least-squares rigid
//!   fitting, boxes, nearest-neighbor index.
//! - [`graph`]: part-whole graph, ordering, junctions, joint checks.
//! - [`correspondence`]: pluggable matchers (oracle / feature descriptors)
//!   and density validation.
//! - [`rigid_fit`]: RANSAC with anchors, point-to-point ICP.
//! - [`pipeline`]: the end-to-end registration flow.
//! - [`synthetic`]: articulated scene generation with ground truth and scan
//!   degradation.
//! - [`io`]: PLY, label, config, result, truth, scene and metrics files.

pub mod correspondence;
pub mod features;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod rigid_fit;
pub mod synthetic;

pub use correspondence::{
    match_clouds, validate_density, Correspondence, CorrespondenceSet, DensityEntry,
    MatcherConfig, MatcherVariant,
};
pub use geometry::{
    aabb_of, fit_rigid, median_nn_spacing, nn_rmse, Aabb, GeometryError, Point3, PointCloud,
    RigidTransform, SpatialIndex,
};
pub use graph::{
    build_graph, joint_intact, joint_intact_with, larger_neighbor, max_junction_gaps, part_order,
    Junction, Part, PartGraph, PartId,
};
pub use pipeline::{
    register, register_with_correspondences, whole_body_fit, PartStatus, PipelineConfig,
    PipelineError, RegistrationResult,
};
pub use rigid_fit::{icp, ransac_rigid, FitReport, IcpParams, RansacParams, RigidFitError};
pub use synthetic::{
    articulate, degrade, generate, ArticulatedSpec, DegradationSpec, GroundTruth, JointSpec,
    PartSpec, PointProvenance, PrimitiveShape,
};
