//! Source→target point correspondences behind a pluggable matcher interface,
//! plus per-part density validation.
//!
//! The oracle matcher consumes ground-truth point provenance from the
//! synthetic scene generator and injects a controlled fraction of outliers;
//! the feature matcher computes local descriptor histograms and keeps mutual
//! nearest-neighbor matches. Both are pure functions of their inputs and the
//! configured seed.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features;
use crate::geometry::{aabb_of, GeometryError, PointCloud, RigidTransform, SpatialIndex};
use crate::graph::{Part, PartGraph, PartId};
use crate::synthetic::PointProvenance;

/// A matched point pair with a confidence in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src_id: usize,
    pub dst_id: usize,
    pub confidence: f64,
}

/// Set of correspondences; no duplicate (src, dst) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn from_vec(items: Vec<Correspondence>) -> Result<Self, MatchError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &items {
            if !seen.insert((c.src_id, c.dst_id)) {
                return Err(MatchError::DuplicatePair { src: c.src_id, dst: c.dst_id });
            }
            if !c.confidence.is_finite() {
                return Err(MatchError::InvalidConfidence(c.src_id));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Correspondence> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherVariant {
    /// Ground-truth provenance with controlled outlier injection; test and
    /// evaluation use.
    Oracle,
    /// Descriptor histograms + mutual nearest neighbors.
    Feature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherConfig {
    pub variant: MatcherVariant,
    /// Fraction of oracle matches replaced by uniform-random target ids.
    pub oracle_outlier_fraction: f64,
    /// Std-dev (meters) of the positional perturbation applied before the
    /// oracle re-snaps a match to the nearest target point.
    pub oracle_noise_sigma: f64,
    /// Descriptor radius as a multiple of the median nearest-neighbor spacing.
    pub feature_radius_multiplier: f64,
    pub rng_seed: u64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            variant: MatcherVariant::Feature,
            oracle_outlier_fraction: 0.0,
            oracle_noise_sigma: 0.0,
            feature_radius_multiplier: 5.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("matcher produced zero correspondences")]
    NoCorrespondences,
    #[error("oracle matcher requires ground-truth provenance")]
    OracleNeedsProvenance,
    #[error("provenance length {provenance} does not match target size {target}")]
    ProvenanceLengthMismatch { provenance: usize, target: usize },
    #[error("source and target clouds must be non-empty")]
    EmptyCloud,
    #[error("duplicate correspondence ({src}, {dst})")]
    DuplicatePair { src: usize, dst: usize },
    #[error("non-finite confidence for source id {0}")]
    InvalidConfidence(usize),
    #[error("invalid matcher config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Runs the configured matcher. The oracle variant needs the target's
/// per-point provenance (from the synthetic module); the feature variant
/// ignores it.
pub fn match_clouds(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &MatcherConfig,
    provenance: Option<&[PointProvenance]>,
) -> Result<CorrespondenceSet, MatchError> {
    if source.is_empty() || target.is_empty() {
        return Err(MatchError::EmptyCloud);
    }
    validate_config(cfg)?;
    let set = match cfg.variant {
        MatcherVariant::Oracle => {
            let provenance = provenance.ok_or(MatchError::OracleNeedsProvenance)?;
            if provenance.len() != target.len() {
                return Err(MatchError::ProvenanceLengthMismatch {
                    provenance: provenance.len(),
                    target: target.len(),
                });
            }
            oracle_match(source, target, provenance, cfg)?
        }
        MatcherVariant::Feature => feature_match(source, target, cfg)?,
    };
    if set.is_empty() {
        return Err(MatchError::NoCorrespondences);
    }
    Ok(set)
}

fn validate_config(cfg: &MatcherConfig) -> Result<(), MatchError> {
    if !(0.0..1.0).contains(&cfg.oracle_outlier_fraction) {
        return Err(MatchError::InvalidConfig(format!(
            "oracle_outlier_fraction {} not in [0, 1)",
            cfg.oracle_outlier_fraction
        )));
    }
    if cfg.oracle_noise_sigma < 0.0 || !cfg.oracle_noise_sigma.is_finite() {
        return Err(MatchError::InvalidConfig("oracle_noise_sigma must be >= 0".into()));
    }
    if cfg.feature_radius_multiplier <= 0.0 {
        return Err(MatchError::InvalidConfig("feature_radius_multiplier must be > 0".into()));
    }
    Ok(())
}

fn oracle_match(
    source: &PointCloud,
    target: &PointCloud,
    provenance: &[PointProvenance],
    cfg: &MatcherConfig,
) -> Result<CorrespondenceSet, MatchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    // True matches in target order: one per non-outlier target point.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (dst_id, prov) in provenance.iter().enumerate() {
        if let PointProvenance::Source(src_id) = prov {
            if *src_id < source.len() {
                pairs.push((*src_id, dst_id));
            }
        }
    }
    if pairs.is_empty() {
        return Err(MatchError::NoCorrespondences);
    }

    if cfg.oracle_noise_sigma > 0.0 {
        let index = SpatialIndex::build(target)?;
        for (_, dst_id) in pairs.iter_mut() {
            let mut q = target.point(*dst_id);
            for k in 0..3 {
                q[k] += gaussian(&mut rng) * cfg.oracle_noise_sigma;
            }
            *dst_id = index.nearest(q).0;
        }
    }

    // Replace an exact count of matches with uniform-random wrong targets.
    // Confidence stays 1.0 so outliers are indistinguishable downstream.
    let outlier_count = (cfg.oracle_outlier_fraction * pairs.len() as f64).round() as usize;
    if outlier_count > 0 {
        let chosen = index::sample(&mut rng, pairs.len(), outlier_count);
        for pick in chosen.iter() {
            let true_dst = pairs[pick].1;
            let mut wrong = rng.random_range(0..target.len());
            while target.len() > 1 && wrong == true_dst {
                wrong = rng.random_range(0..target.len());
            }
            pairs[pick].1 = wrong;
        }
    }

    let items = pairs
        .into_iter()
        .map(|(src_id, dst_id)| Correspondence { src_id, dst_id, confidence: 1.0 })
        .collect();
    // dst perturbation can map two sources onto one target point, but the
    // (src, dst) pairs stay unique because src ids are unique here.
    CorrespondenceSet::from_vec(items)
}

/// Box-Muller; two uniform draws per call keeps the stream layout simple.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn feature_match(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &MatcherConfig,
) -> Result<CorrespondenceSet, MatchError> {
    if source.len() < 2 || target.len() < 2 {
        return Err(MatchError::NoCorrespondences);
    }
    let spacing_src = crate::geometry::median_nn_spacing(source)?;
    let spacing_dst = crate::geometry::median_nn_spacing(target)?;
    // One shared physical radius keeps descriptors comparable across clouds
    // of different density.
    let radius = cfg.feature_radius_multiplier * spacing_src.max(spacing_dst);

    let index_src = SpatialIndex::build(source)?;
    let index_dst = SpatialIndex::build(target)?;

    let normals_src = match source.normals() {
        Some(ns) => ns.to_vec(),
        None => features::estimate_normals(source, &index_src, radius),
    };
    let normals_dst = match target.normals() {
        Some(ns) => ns.to_vec(),
        None => features::estimate_normals(target, &index_dst, radius),
    };

    let desc_src = features::fpfh_descriptors(source, &normals_src, &index_src, radius);
    let desc_dst = features::fpfh_descriptors(target, &normals_dst, &index_dst, radius);

    // Mutual nearest neighbors in descriptor space; ties to the lowest id.
    let best_in = |from: &[features::Descriptor], to: &[features::Descriptor]| -> Vec<(usize, f64)> {
        from.iter()
            .map(|d| {
                let mut best = (usize::MAX, f64::INFINITY);
                for (j, e) in to.iter().enumerate() {
                    let dist = features::descriptor_distance(d, e);
                    if dist < best.1 {
                        best = (j, dist);
                    }
                }
                best
            })
            .collect()
    };
    let fwd = best_in(&desc_src, &desc_dst);
    let bwd = best_in(&desc_dst, &desc_src);

    let mut items = Vec::new();
    for (src_id, &(dst_id, dist)) in fwd.iter().enumerate() {
        if dst_id != usize::MAX && bwd[dst_id].0 == src_id {
            items.push(Correspondence {
                src_id,
                dst_id,
                confidence: 1.0 / (1.0 + dist),
            });
        }
    }
    CorrespondenceSet::from_vec(items)
}

/// Per-part density report entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityEntry {
    pub part: PartId,
    pub source_count: usize,
    /// Target points inside the part's globally-fitted box (margin =
    /// adjacency delta).
    pub target_roi_count: usize,
    pub flagged: bool,
}

/// Reports, for every part, the source point count and how many target
/// points fall inside the part's global-fit bounding box. Entries below
/// `min_points` on either side are flagged; acting on the report is the
/// pipeline's call.
pub fn validate_density(
    g: &PartGraph,
    source: &PointCloud,
    target: &PointCloud,
    global_fit: &RigidTransform,
    min_points: usize,
) -> Vec<DensityEntry> {
    g.parts()
        .iter()
        .map(|part| {
            let fitted: Vec<_> = part
                .point_ids
                .iter()
                .map(|&i| global_fit.apply_point(source.point(i)))
                .collect();
            let roi = aabb_of(&fitted, g.adjacency_delta()).expect("parts are non-empty");
            let target_roi_count = target.points().iter().filter(|p| roi.contains(**p)).count();
            let source_count = part.size();
            DensityEntry {
                part: part.id,
                source_count,
                target_roi_count,
                flagged: source_count < min_points || target_roi_count < min_points,
            }
        })
        .collect()
}

/// Subset of `all` whose source ids belong to `part`, input order preserved.
pub fn correspondences_for_part(all: &CorrespondenceSet, part: &Part) -> CorrespondenceSet {
    CorrespondenceSet {
        items: all
            .iter()
            .filter(|c| part.contains(c.src_id))
            .copied()
            .collect(),
    }
}
