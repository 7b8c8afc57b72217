//! Part-whole structure of an articulated source object: rigid parts over the
//! source cloud, bidirectional adjacency with junction point sets, ordering,
//! and joint-integrity checks.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::geometry::{
    median_nn_spacing, GeometryError, PointCloud, RigidTransform, SpatialIndex,
};

/// Dense 0-based identifier of a rigid part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartId(pub u32);

impl PartId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for PartId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl serde::Serialize for PartId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for PartId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        u32::deserialize(d).map(PartId)
    }
}

/// One rigid part: a set of point ids over the source cloud.
#[derive(Debug, Clone)]
pub struct Part {
    pub id: PartId,
    /// Sorted ascending.
    pub point_ids: Vec<usize>,
}

impl Part {
    pub fn size(&self) -> usize {
        self.point_ids.len()
    }

    pub fn contains(&self, point_id: usize) -> bool {
        self.point_ids.binary_search(&point_id).is_ok()
    }
}

/// Contact region between two adjacent parts.
#[derive(Debug, Clone)]
pub struct Junction {
    pub part_a: PartId,
    pub part_b: PartId,
    /// Point ids of `part_a` lying within the adjacency distance of `part_b`.
    pub anchor_ids_a: Vec<usize>,
    /// Symmetric set for `part_b`.
    pub anchor_ids_b: Vec<usize>,
}

impl Junction {
    /// Anchor ids on the `p` side of this junction.
    pub fn anchors_of(&self, p: PartId) -> Option<&[usize]> {
        if p == self.part_a {
            Some(&self.anchor_ids_a)
        } else if p == self.part_b {
            Some(&self.anchor_ids_b)
        } else {
            None
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("part {0} has no points")]
    EmptyPart(PartId),
    #[error("part graph is not connected (no adjacency within delta for some parts)")]
    DisconnectedGraph,
    #[error("{labels} labels for {points} points")]
    LabelLengthMismatch { labels: usize, points: usize },
    #[error("source cloud is empty")]
    EmptyCloud,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Bidirectional part adjacency graph over a source cloud.
///
/// Immutable after [`build_graph`]; per-part spatial indexes are precomputed
/// so joint checks stay cheap.
#[derive(Debug, Clone)]
pub struct PartGraph {
    parts: Vec<Part>,
    junctions: Vec<Junction>,
    /// Junction indices incident to each part.
    incident: Vec<Vec<usize>>,
    /// Index over each part's source points, aligned with `parts`.
    part_indexes: Vec<SpatialIndex>,
    adjacency_delta: f64,
}

impl PartGraph {
    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn part(&self, id: PartId) -> &Part {
        &self.parts[id.index()]
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn adjacency_delta(&self) -> f64 {
        self.adjacency_delta
    }

    /// Junctions incident to `p`.
    pub fn junctions_of(&self, p: PartId) -> impl Iterator<Item = &Junction> {
        self.incident[p.index()].iter().map(|&j| &self.junctions[j])
    }

    /// Neighbor part ids of `p`, ascending.
    pub fn neighbors(&self, p: PartId) -> Vec<PartId> {
        let mut out: Vec<PartId> = self
            .junctions_of(p)
            .map(|j| if j.part_a == p { j.part_b } else { j.part_a })
            .collect();
        out.sort_unstable();
        out
    }

    /// Junction between `p` and `q`, if adjacent.
    pub fn junction_between(&self, p: PartId, q: PartId) -> Option<&Junction> {
        self.junctions_of(p)
            .find(|j| j.part_a == q || j.part_b == q)
    }

    fn part_index(&self, p: PartId) -> &SpatialIndex {
        &self.part_indexes[p.index()]
    }
}

/// Builds the part graph from per-point labels.
///
/// An edge exists between two parts iff some point of one lies within
/// `delta` of some point of the other; the points doing so form the junction
/// anchor sets. `delta` defaults to 2 × the median nearest-neighbor spacing
/// of the source cloud.
pub fn build_graph(
    source: &PointCloud,
    labels: &[PartId],
    delta: Option<f64>,
) -> Result<PartGraph, GraphError> {
    if source.is_empty() {
        return Err(GraphError::EmptyCloud);
    }
    if labels.len() != source.len() {
        return Err(GraphError::LabelLengthMismatch {
            labels: labels.len(),
            points: source.len(),
        });
    }

    let part_count = labels.iter().map(|id| id.index() + 1).max().unwrap_or(0);
    let mut parts: Vec<Part> = (0..part_count)
        .map(|i| Part { id: PartId(i as u32), point_ids: Vec::new() })
        .collect();
    for (point_id, label) in labels.iter().enumerate() {
        parts[label.index()].point_ids.push(point_id);
    }
    for part in &parts {
        if part.point_ids.is_empty() {
            return Err(GraphError::EmptyPart(part.id));
        }
    }

    let adjacency_delta = match delta {
        Some(d) => d,
        None => 2.0 * median_nn_spacing(source)?,
    };

    // Anchor discovery: one radius query per point against the whole cloud,
    // grouping hits by label.
    let index = SpatialIndex::build(source)?;
    let mut anchor_sets: std::collections::BTreeMap<(u32, u32), BTreeSet<usize>> =
        std::collections::BTreeMap::new();
    for point_id in 0..source.len() {
        let a = labels[point_id];
        for other in index.radius_search(source.point(point_id), adjacency_delta) {
            let b = labels[other];
            if a != b {
                anchor_sets.entry((a.0, b.0)).or_default().insert(point_id);
            }
        }
    }

    let mut junctions = Vec::new();
    let mut incident = vec![Vec::new(); part_count];
    let pairs: BTreeSet<(u32, u32)> = anchor_sets
        .keys()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    for (a, b) in pairs {
        let anchors = |x: u32, y: u32| -> Vec<usize> {
            anchor_sets
                .get(&(x, y))
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default()
        };
        let junction = Junction {
            part_a: PartId(a),
            part_b: PartId(b),
            anchor_ids_a: anchors(a, b),
            anchor_ids_b: anchors(b, a),
        };
        // Radius search is symmetric, so a one-sided junction cannot happen.
        debug_assert!(!junction.anchor_ids_a.is_empty() && !junction.anchor_ids_b.is_empty());
        incident[a as usize].push(junctions.len());
        incident[b as usize].push(junctions.len());
        junctions.push(junction);
    }

    if !is_connected(part_count, &junctions) {
        return Err(GraphError::DisconnectedGraph);
    }

    let part_indexes = parts
        .iter()
        .map(|part| {
            let pts: Vec<_> = part.point_ids.iter().map(|&i| source.point(i)).collect();
            SpatialIndex::from_points(&pts).map_err(GraphError::Geometry)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PartGraph { parts, junctions, incident, part_indexes, adjacency_delta })
}

fn is_connected(part_count: usize, junctions: &[Junction]) -> bool {
    if part_count <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); part_count];
    for j in junctions {
        adj[j.part_a.index()].push(j.part_b.index());
        adj[j.part_b.index()].push(j.part_a.index());
    }
    let mut seen = vec![false; part_count];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Part ids sorted by size descending, ties by ascending id.
pub fn part_order(g: &PartGraph) -> Vec<PartId> {
    let mut ids: Vec<PartId> = g.parts().iter().map(|p| p.id).collect();
    ids.sort_by_key(|&id| (std::cmp::Reverse(g.part(id).size()), id));
    ids
}

/// Largest neighbor of `p` with size ≥ size(p); ties by lower id. `None`
/// when every neighbor is strictly smaller.
pub fn larger_neighbor(g: &PartGraph, p: PartId) -> Option<PartId> {
    g.neighbors(p)
        .into_iter()
        .filter(|&q| g.part(q).size() >= g.part(p).size())
        .min_by_key(|&q| (std::cmp::Reverse(g.part(q).size()), q))
}

/// True iff applying `candidate` to part `p` keeps every joint of `p` within
/// `tau_joint` of its neighbors at their current placements.
///
/// The gap of a joint is the maximum over `p`'s anchor points of the distance
/// from the candidate-transformed anchor to the nearest placed point of the
/// neighbor.
pub fn joint_intact(
    g: &PartGraph,
    source: &PointCloud,
    p: PartId,
    candidate: &RigidTransform,
    placed: &[RigidTransform],
    tau_joint: f64,
) -> bool {
    joint_intact_with(g, source, p, candidate, placed, tau_joint, |_| true)
}

/// [`joint_intact`] restricted to neighbors accepted by `check_neighbor`.
/// The sequential tuning flow uses this to test a candidate only against
/// neighbors whose placement is already settled.
pub fn joint_intact_with(
    g: &PartGraph,
    source: &PointCloud,
    p: PartId,
    candidate: &RigidTransform,
    placed: &[RigidTransform],
    tau_joint: f64,
    check_neighbor: impl Fn(PartId) -> bool,
) -> bool {
    for junction in g.junctions_of(p) {
        let q = if junction.part_a == p { junction.part_b } else { junction.part_a };
        if !check_neighbor(q) {
            continue;
        }
        let gap = junction_gap(g, source, junction, p, candidate, &placed[q.index()]);
        if gap > tau_joint {
            return false;
        }
    }
    true
}

/// Max anchor gap of `p`'s side of `junction`, with `p` under `p_transform`
/// and the neighbor under `q_transform`.
fn junction_gap(
    g: &PartGraph,
    source: &PointCloud,
    junction: &Junction,
    p: PartId,
    p_transform: &RigidTransform,
    q_transform: &RigidTransform,
) -> f64 {
    let q = if junction.part_a == p { junction.part_b } else { junction.part_a };
    // dist(P·x, Q·y) = dist(Q⁻¹·P·x, y), so one relative transform lets us
    // query the neighbor's prebuilt source-frame index.
    let rel = q_transform.invert().compose(p_transform);
    let anchors = junction.anchors_of(p).expect("junction is incident to p");
    let index = g.part_index(q);
    anchors
        .iter()
        .map(|&a| index.nearest(rel.apply_point(source.point(a))).1)
        .fold(0.0, f64::max)
}

/// Max anchor gap per junction (checked from both sides) under the given
/// per-part placements. The non-disintegration diagnostic.
pub fn max_junction_gaps(
    g: &PartGraph,
    source: &PointCloud,
    placed: &[RigidTransform],
) -> Vec<(PartId, PartId, f64)> {
    g.junctions()
        .iter()
        .map(|j| {
            let (a, b) = (j.part_a, j.part_b);
            let gap_a = junction_gap(g, source, j, a, &placed[a.index()], &placed[b.index()]);
            let gap_b = junction_gap(g, source, j, b, &placed[b.index()], &placed[a.index()]);
            (a, b, gap_a.max(gap_b))
        })
        .collect()
}

/// Axis-aligned grid box surface: `step`-spaced points on the boundary of
/// `[origin, origin + extent]`, suitable for exact adjacency reasoning in
/// tests across the crate.
#[cfg(test)]
pub(crate) fn grid_box(origin: [f64; 3], extent: [f64; 3], step: f64) -> Vec<crate::geometry::Point3> {
    use crate::geometry::Point3;
    let n = |e: f64| (e / step).round() as usize;
    let (nx, ny, nz) = (n(extent[0]), n(extent[1]), n(extent[2]));
    let mut pts = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            for k in 0..=nz {
                if i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz {
                    pts.push(Point3::new(
                        origin[0] + i as f64 * step,
                        origin[1] + j as f64 * step,
                        origin[2] + k as f64 * step,
                    ));
                }
            }
        }
    }
    pts
}
