//! Pairwise groupness probabilities `R = (P_i, P_g)`.
//!
//! A pair of persons in a frame is described by an 8-dimensional handcrafted
//! feature vector (relative position, distance, speeds, velocity difference,
//! heading alignment, occlusion). A 2-class linear softmax head maps the
//! features to the probability that the two are separate individuals (`P_i`)
//! or members of the same group (`P_g`). The head can be trained by
//! full-batch gradient descent on labeled pairs, set from handcrafted
//! constants, or bypassed entirely by ingesting score files produced by an
//! external model.

mod ingest;
mod train;

pub use ingest::ingest_scores;
pub use train::{gradient, loss, train_head, train_head_with_history, TrainParams};

use crate::error::{Error, Result};
use crate::ids::{FrameId, PersonId};
use crate::sim::Scenario;
use serde::{Deserialize, Serialize};

/// Indices into [`PairFeatures`], so feature math reads by name.
pub mod feat {
    pub const DX: usize = 0;
    pub const DY: usize = 1;
    pub const DIST: usize = 2;
    pub const SPEED_A: usize = 3;
    pub const SPEED_B: usize = 4;
    pub const SPEED_DIFF: usize = 5;
    pub const HEADING_ALIGN: usize = 6;
    pub const OCCLUDED: usize = 7;
}

/// Number of pair features.
pub const NUM_FEATURES: usize = 8;

/// Handcrafted description of a person pair in one frame:
/// `[dx, dy, distance, speed_a, speed_b, |v_a - v_b|, cos(heading_a - heading_b), occluded]`.
///
/// Positions are window-averaged and velocities are window-averaged central
/// differences, so single-frame jitter is smoothed out. The speed slots
/// belong to the lower- and higher-id person respectively, which makes every
/// slot except `(dx, dy)` symmetric under argument order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairFeatures(pub [f64; NUM_FEATURES]);

impl PairFeatures {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Class label for a training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Individual,
    Group,
}

impl PairLabel {
    /// Row of the head this class occupies: 0 = individual, 1 = group.
    pub fn index(self) -> usize {
        match self {
            PairLabel::Individual => 0,
            PairLabel::Group => 1,
        }
    }
}

/// Linear softmax head: `logits = W f + b`, row 0 scoring the individual
/// class and row 1 the group class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadWeights {
    #[serde(rename = "W")]
    pub w: [[f64; NUM_FEATURES]; 2],
    pub b: [f64; 2],
}

impl HeadWeights {
    pub fn zeros() -> Self {
        HeadWeights { w: [[0.0; NUM_FEATURES]; 2], b: [0.0; 2] }
    }

    /// A head set by hand instead of training: the group logit falls with
    /// distance and velocity mismatch and rises with heading alignment.
    /// `P_g` crosses 0.5 near `distance_offset` meters. The constants live
    /// in the run config, not here.
    pub fn handcrafted(params: &HandcraftedParams) -> Self {
        let mut h = HeadWeights::zeros();
        h.w[1][feat::DIST] = -params.distance_scale;
        h.w[1][feat::SPEED_DIFF] = -params.velocity_scale;
        h.w[1][feat::HEADING_ALIGN] = params.heading_bonus;
        h.w[1][feat::OCCLUDED] = -params.occlusion_penalty;
        h.b[1] = params.distance_scale * params.distance_offset;
        h
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().flatten().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// Constants of the handcrafted head; see [`HeadWeights::handcrafted`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandcraftedParams {
    /// Group-logit slope per meter of pair distance.
    pub distance_scale: f64,
    /// Distance in meters at which `P_g` crosses 0.5, all else neutral.
    pub distance_offset: f64,
    /// Group-logit slope per m/frame of velocity difference.
    pub velocity_scale: f64,
    /// Group-logit bonus at perfectly aligned headings.
    pub heading_bonus: f64,
    /// Group-logit penalty when either person is occluded.
    pub occlusion_penalty: f64,
}

impl Default for HandcraftedParams {
    fn default() -> Self {
        HandcraftedParams {
            distance_scale: 2.4,
            distance_offset: 2.5,
            velocity_scale: 1.2,
            heading_bonus: 0.5,
            occlusion_penalty: 0.25,
        }
    }
}

/// One scored pair: the probabilities that persons `a < b` are individuals
/// or in the same group at `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    pub frame: FrameId,
    pub a: PersonId,
    pub b: PersonId,
    pub p_i: f64,
    pub p_g: f64,
}

impl PairObservation {
    /// Probabilities in range, summing to 1 within 1e-9, and `a < b`.
    pub fn check(&self) -> Result<()> {
        if self.a >= self.b {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) not in canonical order a < b",
                self.a, self.b
            )));
        }
        if !(0.0..=1.0).contains(&self.p_i) || !(0.0..=1.0).contains(&self.p_g) {
            return Err(Error::InvalidInput(format!(
                "probabilities ({}, {}) out of [0, 1]",
                self.p_i, self.p_g
            )));
        }
        let sum = self.p_i + self.p_g;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }
}

/// Average position of `person` over the window frames where it is present.
/// Returns `None` when it is present in none of them.
fn window_mean_position(
    scenario: &Scenario,
    person: PersonId,
    frames: &[FrameId],
) -> Option<[f64; 2]> {
    let mut sum = [0.0, 0.0];
    let mut n = 0.0;
    for &f in frames {
        if let Some(s) = scenario.state(f, person) {
            sum[0] += s.position[0];
            sum[1] += s.position[1];
            n += 1.0;
        }
    }
    (n > 0.0).then(|| [sum[0] / n, sum[1] / n])
}

/// Central-difference velocity at one frame, falling back to a one-sided
/// difference at presence boundaries, in meters per frame.
fn frame_velocity(scenario: &Scenario, person: PersonId, f: FrameId) -> Option<[f64; 2]> {
    let here = scenario.state(f, person)?.position;
    let before = f.0.checked_sub(1).and_then(|p| scenario.state(FrameId(p), person));
    let after = scenario.state(FrameId(f.0 + 1), person);
    Some(match (before, after) {
        (Some(b), Some(a)) => [
            (a.position[0] - b.position[0]) / 2.0,
            (a.position[1] - b.position[1]) / 2.0,
        ],
        (None, Some(a)) => [a.position[0] - here[0], a.position[1] - here[1]],
        (Some(b), None) => [here[0] - b.position[0], here[1] - b.position[1]],
        (None, None) => [0.0, 0.0],
    })
}

/// Mean of the per-frame velocities over the window frames where present.
fn window_mean_velocity(scenario: &Scenario, person: PersonId, frames: &[FrameId]) -> [f64; 2] {
    let mut sum = [0.0, 0.0];
    let mut n = 0.0;
    for &f in frames {
        if let Some(v) = frame_velocity(scenario, person, f) {
            sum[0] += v[0];
            sum[1] += v[1];
            n += 1.0;
        }
    }
    if n > 0.0 {
        [sum[0] / n, sum[1] / n]
    } else {
        [0.0, 0.0]
    }
}

/// Compute the pair features for `(a, b)` at `frame`, smoothing positions
/// and velocities over a `window`-frame span centered on the frame
/// (truncated at sequence ends). `window` must be odd.
///
/// Swapping `a` and `b` flips only the sign of `(dx, dy)`; the speed slots
/// are tied to the lower- and higher-id person regardless of argument order.
pub fn extract_pair_features(
    scenario: &Scenario,
    frame: FrameId,
    a: PersonId,
    b: PersonId,
    window: u32,
) -> Result<PairFeatures> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::config("window", format!("must be odd and positive, got {window}")));
    }
    let state_a = scenario
        .state(frame, a)
        .ok_or(Error::MissingPerson { frame, person: a })?;
    let state_b = scenario
        .state(frame, b)
        .ok_or(Error::MissingPerson { frame, person: b })?;

    let half = window / 2;
    let frames: Vec<FrameId> = (frame.0.saturating_sub(half)..=frame.0 + half)
        .map(FrameId)
        .collect();

    // Present at `frame` by the checks above, so the means always exist.
    let pos_a = window_mean_position(scenario, a, &frames).expect("present at center frame");
    let pos_b = window_mean_position(scenario, b, &frames).expect("present at center frame");
    let dx = pos_b[0] - pos_a[0];
    let dy = pos_b[1] - pos_a[1];

    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let v_lo = window_mean_velocity(scenario, lo, &frames);
    let v_hi = window_mean_velocity(scenario, hi, &frames);

    let (head_lo, head_hi) = if a <= b {
        (state_a.heading, state_b.heading)
    } else {
        (state_b.heading, state_a.heading)
    };
    let occluded = state_a.occluded || state_b.occluded;

    let mut f = [0.0; NUM_FEATURES];
    f[feat::DX] = dx;
    f[feat::DY] = dy;
    f[feat::DIST] = dx.hypot(dy);
    f[feat::SPEED_A] = v_lo[0].hypot(v_lo[1]);
    f[feat::SPEED_B] = v_hi[0].hypot(v_hi[1]);
    f[feat::SPEED_DIFF] = (v_lo[0] - v_hi[0]).hypot(v_lo[1] - v_hi[1]);
    f[feat::HEADING_ALIGN] = (head_lo - head_hi).cos();
    f[feat::OCCLUDED] = if occluded { 1.0 } else { 0.0 };
    Ok(PairFeatures(f))
}

/// Class logits `W f + b`.
pub(crate) fn logits(features: &PairFeatures, weights: &HeadWeights) -> [f64; 2] {
    let mut z = weights.b;
    for c in 0..2 {
        for d in 0..NUM_FEATURES {
            z[c] += weights.w[c][d] * features.0[d];
        }
    }
    z
}

/// Numerically stable two-class softmax.
pub(crate) fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let sum = e0 + e1;
    [e0 / sum, e1 / sum]
}

/// Apply the head to one feature vector, returning `(P_i, P_g)`.
///
/// Stable for logits far beyond `exp` range: the larger logit is subtracted
/// before exponentiation.
pub fn score_pair(features: &PairFeatures, weights: &HeadWeights) -> Result<(f64, f64)> {
    if !features.is_finite() {
        return Err(Error::InvalidInput("non-finite pair feature".into()));
    }
    if !weights.is_finite() {
        return Err(Error::InvalidInput("non-finite head weight".into()));
    }
    let p = softmax2(logits(features, weights));
    Ok((p[0], p[1]))
}

/// Label every same-frame pair of a scenario from its ground-truth
/// partition: `Group` when the two share a group in that frame. The
/// training set a scenario induces.
pub fn labeled_pairs_from_scenario(
    scenario: &Scenario,
    window: u32,
) -> Result<Vec<(PairFeatures, PairLabel)>> {
    let mut out = Vec::new();
    for frame in scenario.frames() {
        let persons: Vec<PersonId> = scenario.persons_at(frame).into_iter().collect();
        let groups = &scenario.gt_partitions[&frame];
        for (i, &a) in persons.iter().enumerate() {
            for &b in &persons[i + 1..] {
                let features = extract_pair_features(scenario, frame, a, b, window)?;
                let together = groups.iter().any(|g| g.contains(&a) && g.contains(&b));
                let label = if together { PairLabel::Group } else { PairLabel::Individual };
                out.push((features, label));
            }
        }
    }
    Ok(out)
}
