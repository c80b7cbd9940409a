//! Community detection on weighted undirected graphs.
//!
//! Modularity maximization drives three clusterers — Louvain, greedy CNM
//! merging, and (as a non-modularity baseline) asynchronous label
//! propagation — plus a brute-force optimal-partition oracle for graphs
//! small enough to enumerate. All of them run on [`WeightedGraph`], a dense
//! index-based view; typed wrappers translate from the temporal groupness
//! graph and back. Spatial and temporal edges are indistinguishable here:
//! any weighting policy lives upstream.
//!
//! Conventions: the adjacency value of a self-loop of stored weight `w` is
//! `A_ii = 2w` (so aggregating a community into one node preserves both
//! total weight and degrees), `m` is the sum of stored edge weights, and
//! modularity is
//!
//! ```text
//! Q = sum_c [ in_c / 2m - gamma * (tot_c / 2m)^2 ]
//! ```
//!
//! with `in_c` the adjacency sum inside community `c` and `tot_c` its
//! degree sum.

mod brute;
mod cnm;
mod label_prop;
mod louvain;

pub use brute::brute_force_labels;
pub use cnm::cnm_labels;
pub use label_prop::label_propagation_labels;
pub use louvain::louvain_labels;

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGroupnessGraph};
use crate::ids::{FrameId, PersonId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Largest node count [`brute_force_optimal`] will enumerate
/// (Bell(12) = 4,213,597 partitions).
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

/// A weighted undirected simple graph over indices `0..n`, with optional
/// self-loops. Zero-weight edges are dropped at construction; they are
/// equivalent to absence for every algorithm here.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    /// Stored self-loop weight per node; counts `2w` toward the degree.
    self_loops: Vec<f64>,
    /// Sum of all stored edge weights, self-loops included.
    total_weight: f64,
    /// Weighted degree `k_i` per node.
    degrees: Vec<f64>,
}

impl WeightedGraph {
    /// Build from an edge list. Indices must be in range, weights finite
    /// and non-negative, and no pair may repeat; `(i, i, w)` entries become
    /// self-loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut graph = WeightedGraph {
            adj: vec![Vec::new(); n],
            self_loops: vec![0.0; n],
            total_weight: 0.0,
            degrees: vec![0.0; n],
        };
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) has weight {w}")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidInput(format!("duplicate edge ({i}, {j})")));
            }
            if w == 0.0 {
                continue;
            }
            graph.total_weight += w;
            if i == j {
                self_loop_insert(&mut graph, i, w);
            } else {
                graph.adj[i].push((j, w));
                graph.adj[j].push((i, w));
                graph.degrees[i] += w;
                graph.degrees[j] += w;
            }
        }
        for nbrs in &mut graph.adj {
            nbrs.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Ok(graph)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Total stored edge weight `m` (half the degree sum).
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Weighted degree `k_i`, counting a self-loop twice.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.self_loops[i]
    }

    /// Neighbors of `i` with positive-weight edges, ascending by index;
    /// self-loops not included.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }
}

fn self_loop_insert(graph: &mut WeightedGraph, i: usize, w: f64) {
    graph.self_loops[i] += w;
    graph.degrees[i] += 2.0 * w;
}

/// Knobs shared by the modularity-driven clusterers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModularityParams {
    /// Resolution multiplier on the null-model term; 1.0 is the plain
    /// modularity the method was published with.
    pub resolution: f64,
    /// Louvain stops when a full two-phase pass gains less than this.
    pub min_gain: f64,
    /// Hard cap on Louvain passes.
    pub max_passes: u32,
}

impl Default for ModularityParams {
    fn default() -> Self {
        ModularityParams { resolution: 1.0, min_gain: 1e-7, max_passes: 50 }
    }
}

impl ModularityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::config("resolution", "must be positive"));
        }
        if !(self.min_gain > 0.0) {
            return Err(Error::config("min_gain", "must be positive"));
        }
        if self.max_passes == 0 {
            return Err(Error::config("max_passes", "must be at least 1"));
        }
        Ok(())
    }
}

/// Relabel `labels` to `0..k` in order of first appearance.
pub fn canonicalize_labels(labels: &mut [usize]) {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for label in labels.iter_mut() {
        let next = remap.len();
        *label = *remap.entry(*label).or_insert(next);
    }
}

/// Modularity of a labeling of `graph` at resolution `gamma`. Errors when
/// the graph has zero total weight (the null model divides by `2m`) or the
/// labeling does not cover every node.
pub fn modularity_labels(graph: &WeightedGraph, labels: &[usize], gamma: f64) -> Result<f64> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::InvalidInput(format!(
            "labeling covers {} of {} nodes",
            labels.len(),
            graph.num_nodes()
        )));
    }
    if graph.total_weight() <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    let two_m = 2.0 * graph.total_weight();
    let num_labels = labels.iter().copied().max().map_or(0, |l| l + 1);
    let mut internal = vec![0.0; num_labels]; // adjacency sum inside each community
    let mut tot = vec![0.0; num_labels]; // degree sum per community
    for i in 0..graph.num_nodes() {
        tot[labels[i]] += graph.degree(i);
        internal[labels[i]] += 2.0 * graph.self_loop(i);
        for &(j, w) in graph.neighbors(i) {
            if labels[i] == labels[j] {
                internal[labels[i]] += w; // visited from both endpoints
            }
        }
    }
    let mut q = 0.0;
    for c in 0..num_labels {
        q += internal[c] / two_m - gamma * (tot[c] / two_m).powi(2);
    }
    Ok(q)
}

/// A community assignment for the temporal groupness graph.
///
/// Canonical form gives communities dense labels `0..k` in node order
/// (frame-major, person-minor).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: BTreeMap<NodeId, usize>,
}

impl Partition {
    pub fn num_communities(&self) -> usize {
        self.assignment.values().copied().max().map_or(0, |l| l + 1)
    }

    /// Relabel communities by first appearance in node order.
    pub fn canonicalize(&mut self) {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        for label in self.assignment.values_mut() {
            let next = remap.len();
            *label = *remap.entry(*label).or_insert(next);
        }
    }
}

/// The node order used when flattening a temporal graph to indices.
pub fn node_order(graph: &TemporalGroupnessGraph) -> Vec<NodeId> {
    graph.nodes.iter().copied().collect()
}

/// Flatten a temporal groupness graph into an indexed weighted graph plus
/// the node order giving index -> node.
pub fn index_graph(graph: &TemporalGroupnessGraph) -> Result<(WeightedGraph, Vec<NodeId>)> {
    graph.audit()?;
    let order = node_order(graph);
    let index: BTreeMap<NodeId, usize> =
        order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .map(|(e, _)| (index[&e.u], index[&e.v], e.w))
        .collect();
    let weighted = WeightedGraph::from_edges(order.len(), &edges)?;
    Ok((weighted, order))
}

fn labels_to_partition(order: &[NodeId], labels: &[usize]) -> Partition {
    let mut partition = Partition {
        assignment: order
            .iter()
            .zip(labels)
            .map(|(&n, &l)| (n, l))
            .collect(),
    };
    partition.canonicalize();
    partition
}

fn partition_to_labels(order: &[NodeId], partition: &Partition) -> Result<Vec<usize>> {
    if partition.assignment.len() != order.len() {
        return Err(Error::InvalidInput(format!(
            "partition assigns {} nodes, graph has {}",
            partition.assignment.len(),
            order.len()
        )));
    }
    order
        .iter()
        .map(|n| {
            partition
                .assignment
                .get(n)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("partition misses node {n}")))
        })
        .collect()
}

/// Modularity of a partition of the temporal groupness graph.
pub fn modularity(
    graph: &TemporalGroupnessGraph,
    partition: &Partition,
    gamma: f64,
) -> Result<f64> {
    let (weighted, order) = index_graph(graph)?;
    let labels = partition_to_labels(&order, partition)?;
    modularity_labels(&weighted, &labels, gamma)
}

/// Louvain clustering of the temporal groupness graph.
pub fn louvain(
    graph: &TemporalGroupnessGraph,
    params: &ModularityParams,
    seed: u64,
) -> Result<Partition> {
    let (weighted, order) = index_graph(graph)?;
    let mut labels = louvain_labels(&weighted, params, seed)?;
    #[cfg(debug_assertions)]
    let q_before = modularity_labels(&weighted, &labels, params.resolution)?;
    slide_frame_blocks(&weighted, &order, params.resolution, &mut labels);
    #[cfg(debug_assertions)]
    {
        let q_after = modularity_labels(&weighted, &labels, params.resolution)?;
        debug_assert!(
            q_after + 1e-9 >= q_before,
            "boundary slide lowered modularity: {q_before} -> {q_after}"
        );
    }
    Ok(labels_to_partition(&order, &labels))
}

/// Cap on boundary-slide sweeps over all frames; each sweep can advance every
/// misplaced community border by one frame.
const MAX_SLIDE_SWEEPS: usize = 1000;

/// Block-wise boundary refinement for labelings of a temporal graph.
///
/// Communities of a temporal groupness graph are tubes of person-nodes that
/// begin and end at frame borders. When a border lands a few frames off, the
/// stranded nodes — the members of one group in one frame — must switch
/// community together: moving any single node first severs its same-frame
/// edges to the rest of the block, so on large graphs node-at-a-time sweeps
/// sit on a plateau and keep the misplaced border. This pass proposes exactly
/// the coordinated move: for every community `c` and frame, the nodes of `c`
/// in that frame whose persons occupy one other community `d` in an adjacent
/// frame are re-assigned to `d` as a block whenever that strictly raises
/// modularity. Sweeps repeat until no move helps, sliding each border one
/// frame per sweep. Deterministic: frames ascending, communities and targets
/// in label order, ties broken toward the smaller target label.
pub fn slide_frame_blocks(
    weighted: &WeightedGraph,
    order: &[NodeId],
    gamma: f64,
    labels: &mut [usize],
) {
    let m = weighted.total_weight();
    if m <= 0.0 || labels.is_empty() {
        return;
    }
    let mut nodes_by_frame: BTreeMap<FrameId, BTreeMap<PersonId, usize>> = BTreeMap::new();
    for (i, node) in order.iter().enumerate() {
        nodes_by_frame
            .entry(node.frame)
            .or_default()
            .insert(node.person, i);
    }
    let num_labels = labels.iter().copied().max().map_or(0, |l| l + 1);
    let mut tot = vec![0.0; num_labels];
    for (i, &label) in labels.iter().enumerate() {
        tot[label] += weighted.degree(i);
    }
    let frames: Vec<FrameId> = nodes_by_frame.keys().copied().collect();
    for _ in 0..MAX_SLIDE_SWEEPS {
        let mut moved = false;
        for &frame in &frames {
            // Re-derive this frame's blocks after every applied move so the
            // frame settles completely before the sweep advances. Each move
            // strictly raises modularity, so the inner loop terminates; the
            // cap is a defensive bound only.
            for _ in 0..MAX_SLIDE_SWEEPS {
                let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &i in nodes_by_frame[&frame].values() {
                    blocks.entry(labels[i]).or_default().push(i);
                }
                let mut applied = false;
                for (&c, members) in &blocks {
                    // Candidate targets: communities the same persons occupy
                    // one frame earlier or later. A block may be fed by both
                    // directions; the union moves as one unit.
                    let mut candidates: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
                    for adj in [frame.0.wrapping_sub(1), frame.0.wrapping_add(1)] {
                        let Some(adj_nodes) = nodes_by_frame.get(&FrameId(adj)) else {
                            continue;
                        };
                        for &i in members {
                            if let Some(&j) = adj_nodes.get(&order[i].person) {
                                if labels[j] != c {
                                    candidates.entry(labels[j]).or_default().insert(i);
                                }
                            }
                        }
                    }
                    let mut best: Option<(f64, usize, Vec<usize>)> = None;
                    for (&d, block) in &candidates {
                        let tot_b: f64 = block.iter().map(|&i| weighted.degree(i)).sum();
                        let mut w_to_d = 0.0;
                        let mut w_to_c = 0.0;
                        for &i in block {
                            for &(j, w) in weighted.neighbors(i) {
                                if block.contains(&j) {
                                    continue;
                                }
                                if labels[j] == d {
                                    w_to_d += w;
                                } else if labels[j] == c {
                                    w_to_c += w;
                                }
                            }
                        }
                        let delta = (w_to_d - w_to_c) / m
                            - gamma * tot_b * (tot[d] + tot_b - tot[c]) / (2.0 * m * m);
                        if delta > 1e-12 && best.as_ref().is_none_or(|(b, _, _)| delta > *b) {
                            best = Some((delta, d, block.iter().copied().collect()));
                        }
                    }
                    if let Some((_, d, block)) = best {
                        let tot_b: f64 = block.iter().map(|&i| weighted.degree(i)).sum();
                        for &i in &block {
                            labels[i] = d;
                        }
                        tot[c] -= tot_b;
                        tot[d] += tot_b;
                        applied = true;
                        moved = true;
                        break;
                    }
                }
                if !applied {
                    break;
                }
            }
        }
        if !moved {
            break;
        }
    }
}

/// Weighted asynchronous label propagation on the temporal groupness graph.
pub fn label_propagation(
    graph: &TemporalGroupnessGraph,
    seed: u64,
    max_iters: u32,
) -> Result<Partition> {
    let (weighted, order) = index_graph(graph)?;
    let labels = label_propagation_labels(&weighted, seed, max_iters)?;
    Ok(labels_to_partition(&order, &labels))
}

/// Clauset-Newman-Moore greedy modularity merging on the temporal
/// groupness graph.
pub fn cnm_greedy(graph: &TemporalGroupnessGraph, gamma: f64) -> Result<Partition> {
    let (weighted, order) = index_graph(graph)?;
    let labels = cnm_labels(&weighted, gamma)?;
    Ok(labels_to_partition(&order, &labels))
}

/// Exhaustive optimal partition of a tiny temporal groupness graph;
/// the oracle the other clusterers are tested against.
pub fn brute_force_optimal(
    graph: &TemporalGroupnessGraph,
    gamma: f64,
) -> Result<(Partition, f64)> {
    let (weighted, order) = index_graph(graph)?;
    let (labels, q) = brute_force_labels(&weighted, gamma)?;
    Ok((labels_to_partition(&order, &labels), q))
}

/// Which clustering algorithm a pipeline stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clusterer {
    Louvain,
    #[serde(rename = "lp")]
    LabelPropagation,
    Cnm,
}

impl std::str::FromStr for Clusterer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "louvain" => Ok(Clusterer::Louvain),
            "lp" | "label_propagation" => Ok(Clusterer::LabelPropagation),
            "cnm" => Ok(Clusterer::Cnm),
            other => Err(Error::config(
                "clusterer",
                format!("unknown clusterer {other:?}; expected louvain, lp, or cnm"),
            )),
        }
    }
}

impl std::fmt::Display for Clusterer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clusterer::Louvain => "louvain",
            Clusterer::LabelPropagation => "lp",
            Clusterer::Cnm => "cnm",
        })
    }
}

impl Clusterer {
    /// Run this clusterer on an indexed graph. `lp_max_iters` only applies
    /// to label propagation.
    pub fn run(
        &self,
        graph: &WeightedGraph,
        params: &ModularityParams,
        seed: u64,
        lp_max_iters: u32,
    ) -> Result<Vec<usize>> {
        match self {
            Clusterer::Louvain => louvain_labels(graph, params, seed),
            Clusterer::LabelPropagation => label_propagation_labels(graph, seed, lp_max_iters),
            Clusterer::Cnm => cnm_labels(graph, params.resolution),
        }
    }
}
