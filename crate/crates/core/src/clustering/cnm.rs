//! Clauset-Newman-Moore greedy modularity merging.

use super::{canonicalize_labels, WeightedGraph};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// CNM on an indexed graph: start from singleton communities and keep
/// merging the pair with the largest modularity gain
/// `e_cd / m - gamma * tot_c * tot_d / (2 m^2)` while it is positive. Only
/// connected pairs can gain, so candidates are tracked as a map of
/// between-community weights. Ties break toward the smallest label pair,
/// and a merge keeps the smaller label, so the result is deterministic.
pub fn cnm_labels(graph: &WeightedGraph, gamma: f64) -> Result<Vec<usize>> {
    if !(gamma > 0.0) {
        return Err(Error::config("resolution", "must be positive"));
    }
    let n = graph.num_nodes();
    if n == 0 || graph.total_weight() <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    let m = graph.total_weight();

    let mut labels: Vec<usize> = (0..n).collect();
    let mut tot: BTreeMap<usize, f64> = (0..n).map(|i| (i, graph.degree(i))).collect();
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for &(j, w) in graph.neighbors(i) {
            if i < j {
                *between.entry((i, j)).or_insert(0.0) += w;
            }
        }
    }

    loop {
        // Ascending key order + strict improvement = smallest pair wins ties.
        let mut best: Option<((usize, usize), f64)> = None;
        for (&(c, d), &e_cd) in &between {
            let gain = e_cd / m - gamma * tot[&c] * tot[&d] / (2.0 * m * m);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some(((c, d), gain));
            }
        }
        let Some(((c, d), gain)) = best else { break };
        if gain <= 0.0 {
            break;
        }

        // Merge d into c (c < d by key order).
        let tot_d = tot.remove(&d).unwrap();
        *tot.get_mut(&c).unwrap() += tot_d;
        let mut redirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for ((a, b), w) in std::mem::take(&mut between) {
            if (a, b) == (c, d) {
                continue; // now internal weight
            }
            let a = if a == d { c } else { a };
            let b = if b == d { c } else { b };
            *redirected.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        between = redirected;
        for label in labels.iter_mut() {
            if *label == d {
                *label = c;
            }
        }
    }

    canonicalize_labels(&mut labels);
    Ok(labels)
}
