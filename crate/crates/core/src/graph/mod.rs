//! Groupness graph construction.
//!
//! A framewise graph holds one node per person present in a frame and one
//! spatial edge per scored pair, weighted by `P_g`. Framewise graphs are
//! linked across consecutive frames by temporal edges weighted
//! `lambda_t * P_t` to form the temporal groupness graph that dynamic
//! clustering consumes. The static baseline instead averages the framewise
//! spatial weights per pair into a single graph over persons.

use crate::error::{Error, Result};
use crate::groupness::PairObservation;
use crate::ids::{FrameId, PersonId};
use crate::sim::{PersonState, TemporalLinkSet};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// A node of the temporal groupness graph: one person in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub frame: FrameId,
    pub person: PersonId,
}

impl NodeId {
    pub fn new(frame: FrameId, person: PersonId) -> Self {
        NodeId { frame, person }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.frame, self.person)
    }
}

/// Whether an edge connects persons within a frame or across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Spatial,
    Temporal,
}

/// An undirected weighted edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: f64,
}

/// The temporal groupness graph (or a single-frame slice of it).
///
/// Simple and undirected: no self-loops, no duplicate edges, canonical
/// endpoint order, non-negative weights. Spatial edges connect same-frame
/// nodes; temporal edges connect nodes exactly one frame apart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalGroupnessGraph {
    pub nodes: BTreeSet<NodeId>,
    pub spatial_edges: Vec<GraphEdge>,
    pub temporal_edges: Vec<GraphEdge>,
}

impl TemporalGroupnessGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// The distinct frames the graph spans, ascending.
    pub fn frames(&self) -> Vec<FrameId> {
        let mut frames: Vec<FrameId> = self.nodes.iter().map(|n| n.frame).collect();
        frames.dedup();
        frames
    }

    /// All edges regardless of kind.
    pub fn edges(&self) -> impl Iterator<Item = (&GraphEdge, EdgeKind)> {
        self.spatial_edges
            .iter()
            .map(|e| (e, EdgeKind::Spatial))
            .chain(self.temporal_edges.iter().map(|e| (e, EdgeKind::Temporal)))
    }

    /// Verify every structural invariant; used by tests and after imports.
    pub fn audit(&self) -> Result<()> {
        let mut seen: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for (edge, kind) in self.edges() {
            if edge.u >= edge.v {
                return Err(Error::Inconsistency(format!(
                    "edge {} - {} not in canonical order (or a self-loop)",
                    edge.u, edge.v
                )));
            }
            for end in [edge.u, edge.v] {
                if !self.nodes.contains(&end) {
                    return Err(Error::Inconsistency(format!(
                        "edge endpoint {end} is not a node"
                    )));
                }
            }
            if !(edge.w >= 0.0) || !edge.w.is_finite() {
                return Err(Error::Inconsistency(format!(
                    "edge {} - {} has invalid weight {}",
                    edge.u, edge.v, edge.w
                )));
            }
            if !seen.insert((edge.u, edge.v)) {
                return Err(Error::Inconsistency(format!(
                    "duplicate edge {} - {}",
                    edge.u, edge.v
                )));
            }
            match kind {
                EdgeKind::Spatial if edge.u.frame != edge.v.frame => {
                    return Err(Error::Inconsistency(format!(
                        "spatial edge {} - {} spans frames",
                        edge.u, edge.v
                    )));
                }
                EdgeKind::Temporal if edge.v.frame.0 != edge.u.frame.0 + 1 => {
                    return Err(Error::Inconsistency(format!(
                        "temporal edge {} - {} does not span consecutive frames",
                        edge.u, edge.v
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Build the framewise graph for one frame: a node per present person and a
/// spatial edge per observation, weighted by its `P_g`.
pub fn build_framewise(
    frame: FrameId,
    observations: &[PairObservation],
    persons_present: &BTreeSet<PersonId>,
) -> Result<TemporalGroupnessGraph> {
    let mut graph = TemporalGroupnessGraph::default();
    for &p in persons_present {
        graph.nodes.insert(NodeId::new(frame, p));
    }
    let mut seen: BTreeSet<(PersonId, PersonId)> = BTreeSet::new();
    for obs in observations {
        if obs.frame != frame {
            return Err(Error::InvalidInput(format!(
                "observation at frame {} passed to frame {frame}",
                obs.frame
            )));
        }
        obs.check()?;
        for p in [obs.a, obs.b] {
            if !persons_present.contains(&p) {
                return Err(Error::Inconsistency(format!(
                    "observation ({}, {}) references person {p}, absent at frame {frame}",
                    obs.a, obs.b
                )));
            }
        }
        if !seen.insert((obs.a, obs.b)) {
            return Err(Error::Inconsistency(format!(
                "duplicate observation ({}, {}) at frame {frame}",
                obs.a, obs.b
            )));
        }
        graph.spatial_edges.push(GraphEdge {
            u: NodeId::new(frame, obs.a),
            v: NodeId::new(frame, obs.b),
            w: obs.p_g,
        });
    }
    graph.spatial_edges.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
    Ok(graph)
}

/// Merge framewise graphs and connect them with temporal edges of weight
/// `lambda_t * P_t`, one per identity link. Zero-weight links are dropped.
///
/// The framewise graphs must each cover a single frame and be ordered with
/// strictly increasing frames; a link must land on nodes that exist (its
/// source frame and the following frame both present).
pub fn link_temporal(
    framewise: &[TemporalGroupnessGraph],
    links: &TemporalLinkSet,
    lambda_t: f64,
) -> Result<TemporalGroupnessGraph> {
    if !(lambda_t >= 0.0) {
        return Err(Error::config("lambda_t", "must be non-negative"));
    }
    links.check_consistency()?;

    let mut graph = TemporalGroupnessGraph::default();
    let mut last_frame: Option<FrameId> = None;
    for fw in framewise {
        let frames = fw.frames();
        if frames.len() > 1 {
            return Err(Error::InvalidInput(format!(
                "framewise graph spans {} frames; expected one",
                frames.len()
            )));
        }
        if let (Some(&frame), Some(last)) = (frames.first(), last_frame) {
            if frame <= last {
                return Err(Error::InvalidInput(format!(
                    "framewise graphs out of order: frame {frame} after {last}"
                )));
            }
        }
        if let Some(&frame) = frames.first() {
            last_frame = Some(frame);
        }
        graph.nodes.extend(fw.nodes.iter().copied());
        graph.spatial_edges.extend(fw.spatial_edges.iter().copied());
    }

    for link in &links.links {
        let u = NodeId::new(link.frame, link.a);
        let v = NodeId::new(FrameId(link.frame.0 + 1), link.b);
        for end in [u, v] {
            if !graph.nodes.contains(&end) {
                return Err(Error::Inconsistency(format!(
                    "temporal link endpoint {end} is not a node"
                )));
            }
        }
        let w = lambda_t * link.p_t;
        if w == 0.0 {
            continue;
        }
        graph.temporal_edges.push(GraphEdge { u, v, w });
    }
    graph.temporal_edges.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
    debug_assert!(graph.audit().is_ok());
    Ok(graph)
}

/// Pairs to score in one frame under k-nearest-neighbor pruning: `(a, b)`
/// is kept iff `b` is among `a`'s `k` nearest persons or vice versa.
/// Distance ties break toward the smaller person id. Pairs come back
/// canonical (`a < b`), sorted, duplicate-free.
pub fn knn_pairs(
    states: &BTreeMap<PersonId, PersonState>,
    k: usize,
) -> Result<Vec<(PersonId, PersonId)>> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let persons: Vec<PersonId> = states.keys().copied().collect();
    let mut kept: BTreeSet<(PersonId, PersonId)> = BTreeSet::new();
    for &a in &persons {
        let pa = states[&a].position;
        let mut neighbors: Vec<(f64, PersonId)> = persons
            .iter()
            .filter(|&&b| b != a)
            .map(|&b| {
                let pb = states[&b].position;
                ((pa[0] - pb[0]).hypot(pa[1] - pb[1]), b)
            })
            .collect();
        neighbors.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, b) in neighbors.iter().take(k) {
            kept.insert((a.min(b), a.max(b)));
        }
    }
    Ok(kept.into_iter().collect())
}

/// A graph over persons (no frame axis): the static baseline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticGroupnessGraph {
    pub persons: BTreeSet<PersonId>,
    /// Canonical (`a < b`) edges with mean groupness weights.
    pub edges: Vec<(PersonId, PersonId, f64)>,
}

/// Collapse framewise graphs into one static graph: a node per person seen
/// in any frame, and per pair the arithmetic mean of `P_g` over the frames
/// where that pair was observed (unobserved frames do not dilute the mean).
pub fn aggregate_static_graph(
    framewise: &[TemporalGroupnessGraph],
) -> Result<StaticGroupnessGraph> {
    if framewise.is_empty() {
        return Err(Error::InvalidInput("no framewise graphs to aggregate".into()));
    }
    let mut graph = StaticGroupnessGraph::default();
    let mut sums: BTreeMap<(PersonId, PersonId), (f64, u32)> = BTreeMap::new();
    for fw in framewise {
        for node in &fw.nodes {
            graph.persons.insert(node.person);
        }
        for edge in &fw.spatial_edges {
            let key = (
                edge.u.person.min(edge.v.person),
                edge.u.person.max(edge.v.person),
            );
            let entry = sums.entry(key).or_insert((0.0, 0));
            entry.0 += edge.w;
            entry.1 += 1;
        }
    }
    graph.edges = sums
        .into_iter()
        .map(|((a, b), (sum, n))| (a, b, sum / n as f64))
        .collect();
    Ok(graph)
}
