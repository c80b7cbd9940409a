//! Exhaustive optimal-partition search for tiny graphs: the oracle the
//! heuristic clusterers are measured against.

use super::{WeightedGraph, BRUTE_FORCE_MAX_NODES};
use crate::error::{Error, Result};

/// Enumerate every set partition of the nodes (restricted growth strings,
/// so each partition appears exactly once, already in canonical labeling)
/// and return a partition with maximal modularity together with that
/// modularity. Ties keep the first partition in enumeration order, which
/// makes the result deterministic.
///
/// Refuses graphs beyond [`BRUTE_FORCE_MAX_NODES`] nodes — Bell numbers
/// grow too fast past that.
pub fn brute_force_labels(graph: &WeightedGraph, gamma: f64) -> Result<(Vec<usize>, f64)> {
    let n = graph.num_nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::SizeLimit { nodes: n, max: BRUTE_FORCE_MAX_NODES });
    }
    if n == 0 || graph.total_weight() <= 0.0 {
        return Err(Error::UndefinedModularity);
    }

    // Flat views so the per-leaf modularity evaluation allocates nothing.
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for &(j, w) in graph.neighbors(i) {
            if i < j {
                edges.push((i, j, w));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();
    let self_internal: Vec<f64> = (0..n).map(|i| 2.0 * graph.self_loop(i)).collect();
    let two_m = 2.0 * graph.total_weight();

    let mut labels = vec![0usize; n];
    let mut best_labels = labels.clone();
    let mut best_q = f64::NEG_INFINITY;
    let mut internal = [0.0; BRUTE_FORCE_MAX_NODES];
    let mut tot = [0.0; BRUTE_FORCE_MAX_NODES];

    // Depth-first over restricted growth strings: node `d` may take any
    // label already in use by nodes before it, or the next fresh one —
    // `max_label[d]` is that fresh label.
    let mut max_label = vec![0usize; n + 1];
    if n > 1 {
        max_label[1] = 1;
    }
    let mut depth = 1; // labels[0] is fixed at 0
    let mut choice = vec![0usize; n + 1];
    loop {
        if depth == n {
            let q = evaluate(
                &edges,
                &degrees,
                &self_internal,
                &labels,
                gamma,
                two_m,
                &mut internal,
                &mut tot,
            );
            if q > best_q {
                best_q = q;
                best_labels.copy_from_slice(&labels);
            }
            // Backtrack to the deepest node with an untried label.
            loop {
                depth -= 1;
                if depth == 0 {
                    return Ok((best_labels, best_q));
                }
                if choice[depth] <= max_label[depth] {
                    break;
                }
            }
        }
        let label = choice[depth];
        labels[depth] = label;
        max_label[depth + 1] = max_label[depth].max(label + 1);
        choice[depth] += 1;
        choice[depth + 1] = 0;
        depth += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    edges: &[(usize, usize, f64)],
    degrees: &[f64],
    self_internal: &[f64],
    labels: &[usize],
    gamma: f64,
    two_m: f64,
    internal: &mut [f64; BRUTE_FORCE_MAX_NODES],
    tot: &mut [f64; BRUTE_FORCE_MAX_NODES],
) -> f64 {
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    internal[..k].fill(0.0);
    tot[..k].fill(0.0);
    for (i, &label) in labels.iter().enumerate() {
        tot[label] += degrees[i];
        internal[label] += self_internal[i];
    }
    for &(i, j, w) in edges {
        if labels[i] == labels[j] {
            internal[labels[i]] += 2.0 * w;
        }
    }
    let mut q = 0.0;
    for c in 0..k {
        q += internal[c] / two_m - gamma * (tot[c] / two_m).powi(2);
    }
    q
}
