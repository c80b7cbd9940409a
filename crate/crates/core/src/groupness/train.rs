//! Full-batch gradient descent for the softmax head.

use super::{logits, softmax2, HeadWeights, PairFeatures, PairLabel, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Hyper-parameters of [`train_head`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: u32,
    /// Coefficient of the `l2 * ||W||^2` penalty; the bias is not penalized.
    pub l2: f64,
    /// Seeds the weight initialization only; the descent itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { learning_rate: 0.1, epochs: 500, l2: 1e-4, seed: 0 }
    }
}

/// Mean cross-entropy over the batch plus the l2 penalty on `W`.
pub fn loss(labeled: &[(PairFeatures, PairLabel)], weights: &HeadWeights, l2: f64) -> f64 {
    let mut ce = 0.0;
    for (features, label) in labeled {
        let z = logits(features, weights);
        // log-sum-exp in the same stable form as the softmax itself
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        ce += lse - z[label.index()];
    }
    let penalty: f64 = weights.w.iter().flatten().map(|w| w * w).sum();
    ce / labeled.len() as f64 + l2 * penalty
}

/// Analytic gradient of [`loss`] with respect to `W` and `b`.
pub fn gradient(
    labeled: &[(PairFeatures, PairLabel)],
    weights: &HeadWeights,
    l2: f64,
) -> ([[f64; NUM_FEATURES]; 2], [f64; 2]) {
    let mut grad_w = [[0.0; NUM_FEATURES]; 2];
    let mut grad_b = [0.0; 2];
    let n = labeled.len() as f64;
    for (features, label) in labeled {
        let p = softmax2(logits(features, weights));
        for c in 0..2 {
            // d(cross-entropy)/d(logit_c) = p_c - [c == label]
            let delta = p[c] - if c == label.index() { 1.0 } else { 0.0 };
            grad_b[c] += delta / n;
            for d in 0..NUM_FEATURES {
                grad_w[c][d] += delta * features.0[d] / n;
            }
        }
    }
    for c in 0..2 {
        for d in 0..NUM_FEATURES {
            grad_w[c][d] += 2.0 * l2 * weights.w[c][d];
        }
    }
    (grad_w, grad_b)
}

/// Train the head and also return the loss after initialization and after
/// every epoch, for convergence inspection.
pub fn train_head_with_history(
    labeled: &[(PairFeatures, PairLabel)],
    params: &TrainParams,
) -> Result<(HeadWeights, Vec<f64>)> {
    if labeled.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if let Some((f, _)) = labeled.iter().find(|(f, _)| !f.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite training features {f:?}")));
    }
    let classes: [bool; 2] = labeled.iter().fold([false; 2], |mut seen, (_, l)| {
        seen[l.index()] = true;
        seen
    });
    if !(classes[0] && classes[1]) {
        log::warn!("training set contains only one class; the head will saturate");
    }

    // Small random init so training is seed-reproducible but not stuck at
    // the exact saddle of all-zero weights.
    let mut rng = substream(params.seed, "train");
    let mut weights = HeadWeights::zeros();
    for c in 0..2 {
        for d in 0..NUM_FEATURES {
            weights.w[c][d] = 0.01 * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let init_weights = weights.clone();
    let initial = loss(labeled, &weights, params.l2);
    let mut history = Vec::with_capacity(params.epochs as usize + 1);
    history.push(initial);
    for _ in 0..params.epochs {
        let (grad_w, grad_b) = gradient(labeled, &weights, params.l2);
        for c in 0..2 {
            weights.b[c] -= params.learning_rate * grad_b[c];
            for d in 0..NUM_FEATURES {
                weights.w[c][d] -= params.learning_rate * grad_w[c][d];
            }
        }
        history.push(loss(labeled, &weights, params.l2));
    }

    // Contract: training never returns something worse than it started
    // with. A diverging learning rate falls back to the initialization.
    if *history.last().unwrap() > initial {
        log::warn!(
            "training diverged (loss {} -> {}); keeping the initial weights",
            initial,
            history.last().unwrap()
        );
        return Ok((init_weights, history));
    }
    Ok((weights, history))
}

/// Fit the softmax head to labeled pairs by full-batch gradient descent on
/// mean cross-entropy with an l2 penalty on `W`.
pub fn train_head(
    labeled: &[(PairFeatures, PairLabel)],
    params: &TrainParams,
) -> Result<HeadWeights> {
    train_head_with_history(labeled, params).map(|(w, _)| w)
}
