//! Louvain modularity maximization: local moves, then aggregation, repeated.

use super::{canonicalize_labels, modularity_labels, ModularityParams, WeightedGraph};
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Safety cap on move sweeps within one level; each sweep strictly
/// increases Q, so hitting this means floating-point cycling.
const MAX_SWEEPS: usize = 1000;

/// Louvain on an indexed graph. Seeded-shuffled node order, best-gain
/// moves with ties toward the smaller community label, aggregation into
/// super-nodes with self-loops, until a full pass gains less than
/// `min_gain` or `max_passes` is hit; a final node-level refinement over
/// the original graph then settles borders the aggregation froze.
/// Deterministic per seed.
pub fn louvain_labels(
    graph: &WeightedGraph,
    params: &ModularityParams,
    seed: u64,
) -> Result<Vec<usize>> {
    params.validate()?;
    if graph.num_nodes() == 0 || graph.total_weight() <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    let mut rng = substream(seed, "cluster");
    let gamma = params.resolution;

    let mut level = graph.clone();
    let mut composed: Vec<usize> = (0..graph.num_nodes()).collect();
    // Q of the singleton partition of the current level equals Q of the
    // composed labels on the original graph, so the pass gain telescopes.
    let singleton: Vec<usize> = (0..level.num_nodes()).collect();
    let mut q_prev = modularity_labels(&level, &singleton, gamma)?;

    for _pass in 0..params.max_passes {
        let (labels, q_after) = one_level(&level, gamma, &mut rng);
        debug_assert!(
            (q_after - modularity_labels(&level, &labels, gamma).unwrap()).abs() < 1e-9,
            "incremental Q drifted from the from-scratch value"
        );
        for slot in composed.iter_mut() {
            *slot = labels[*slot];
        }
        let communities = labels.iter().copied().max().map_or(0, |l| l + 1);
        if q_after - q_prev < params.min_gain || communities == level.num_nodes() {
            break;
        }
        level = aggregate(&level, &labels, communities);
        q_prev = q_after;
    }

    // Refinement: once communities become super-nodes, a misplaced border
    // node can no longer move on its own, so the hierarchy can settle on a
    // partition that a single-node move still improves (e.g. community
    // borders cutting parallel temporal tubes at different frames). A last
    // round of flat sweeps moves individual nodes again; every move
    // strictly increases Q.
    canonicalize_labels(&mut composed);
    #[cfg(debug_assertions)]
    let q_before_refine = modularity_labels(graph, &composed, gamma)?;
    let q_refined = move_sweeps(graph, gamma, &mut rng, &mut composed);
    #[cfg(debug_assertions)]
    debug_assert!(
        q_refined + 1e-9 >= q_before_refine,
        "refinement lowered Q: {q_before_refine} -> {q_refined}"
    );
    let _ = q_refined;

    canonicalize_labels(&mut composed);
    Ok(composed)
}

/// Phase 1: move nodes between communities until no move helps. Returns
/// dense labels and the modularity they achieve, tracked incrementally.
fn one_level(graph: &WeightedGraph, gamma: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let mut labels: Vec<usize> = (0..graph.num_nodes()).collect();
    let q = move_sweeps(graph, gamma, rng, &mut labels);
    canonicalize_labels(&mut labels);
    (labels, q)
}

/// Move nodes between communities until no single-node move helps,
/// starting from the given dense labels. Returns the modularity reached.
fn move_sweeps(
    graph: &WeightedGraph,
    gamma: f64,
    rng: &mut ChaCha8Rng,
    labels: &mut [usize],
) -> f64 {
    let n = graph.num_nodes();
    let m = graph.total_weight();
    // Per community: degree sum, and adjacency sum of internal edges
    // (each internal pair counted from both ends, self-loops as 2w).
    let mut tot: Vec<f64> = vec![0.0; n];
    let mut internal: Vec<f64> = vec![0.0; n];
    for i in 0..n {
        let c = labels[i];
        tot[c] += graph.degree(i);
        internal[c] += 2.0 * graph.self_loop(i);
        for &(j, w) in graph.neighbors(i) {
            if labels[j] == c {
                internal[c] += w;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut sweeps = 0;
    loop {
        let mut moved = false;
        sweeps += 1;
        for &i in &order {
            let c = labels[i];
            let k_i = graph.degree(i);
            let mut weight_to: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in graph.neighbors(i) {
                *weight_to.entry(labels[j]).or_insert(0.0) += w;
            }
            let w_own = weight_to.get(&c).copied().unwrap_or(0.0);
            weight_to.entry(c).or_insert(0.0);

            // Take i out of its community, then insert it where the gain
            // w(i->d)/m - gamma * k_i * tot_d / 2m^2 is largest. Ascending
            // label order plus strict improvement makes ties pick the
            // smallest label.
            tot[c] -= k_i;
            internal[c] -= 2.0 * w_own + 2.0 * graph.self_loop(i);

            let mut best = (c, f64::NEG_INFINITY);
            for (&d, &w_d) in &weight_to {
                let gain = w_d / m - gamma * k_i * tot[d] / (2.0 * m * m);
                if gain > best.1 {
                    best = (d, gain);
                }
            }

            let d = best.0;
            let w_d = weight_to[&d];
            tot[d] += k_i;
            internal[d] += 2.0 * w_d + 2.0 * graph.self_loop(i);
            labels[i] = d;
            moved |= d != c;
        }
        if !moved {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            log::warn!("louvain level hit the {MAX_SWEEPS}-sweep cap without settling");
            break;
        }
    }

    let two_m = 2.0 * m;
    (0..n)
        .map(|c| internal[c] / two_m - gamma * (tot[c] / two_m).powi(2))
        .sum()
}

/// Phase 2: collapse each community into one node; internal weight
/// (including member self-loops) becomes the super-node's self-loop.
fn aggregate(graph: &WeightedGraph, labels: &[usize], communities: usize) -> WeightedGraph {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..graph.num_nodes() {
        let ci = labels[i];
        if graph.self_loop(i) > 0.0 {
            *merged.entry((ci, ci)).or_insert(0.0) += graph.self_loop(i);
        }
        for &(j, w) in graph.neighbors(i) {
            if i < j {
                let cj = labels[j];
                let key = (ci.min(cj), ci.max(cj));
                *merged.entry(key).or_insert(0.0) += w;
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> =
        merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    WeightedGraph::from_edges(communities, &edges)
        .expect("aggregated graph is simple by construction")
}
