//! Weighted asynchronous label propagation.

use super::{canonicalize_labels, WeightedGraph};
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Label propagation on an indexed graph: every node starts with its own
/// label and repeatedly adopts the label with the largest incident weight
/// sum (ties toward the smaller label), sweeping nodes in a freshly
/// shuffled order each iteration, until a sweep changes nothing or
/// `max_iters` sweeps have run. Deterministic per seed.
///
/// Isolated nodes keep their own label; propagation never crosses a
/// disconnected component.
pub fn label_propagation_labels(
    graph: &WeightedGraph,
    seed: u64,
    max_iters: u32,
) -> Result<Vec<usize>> {
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::InvalidInput("label propagation needs a nonempty graph".into()));
    }
    let mut rng = substream(seed, "cluster");
    let mut labels: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..max_iters {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &i in &order {
            let mut weight_per_label: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in graph.neighbors(i) {
                *weight_per_label.entry(labels[j]).or_insert(0.0) += w;
            }
            if weight_per_label.is_empty() {
                continue;
            }
            // Ascending iteration + strict improvement = smallest label wins ties.
            let mut best = (labels[i], f64::NEG_INFINITY);
            for (&label, &weight) in &weight_per_label {
                if weight > best.1 {
                    best = (label, weight);
                }
            }
            if best.0 != labels[i] {
                labels[i] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    canonicalize_labels(&mut labels);
    Ok(labels)
}
