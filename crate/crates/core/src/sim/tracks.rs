//! Degrade ground-truth identity links into noisy tracker output.

use super::{Scenario, TemporalLink, TemporalLinkSet};
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;

/// Simulate tracker errors on a scenario's identity links.
///
/// Ground truth links every person present in two consecutive frames to
/// itself with probability 1. Corruption does two things, both seeded:
///
/// * confidence noise: each link's probability becomes
///   `clamp(1 - |N(0, confidence_noise_sigma)|, 0, 1)`, so confidences stay
///   high but dip below 1;
/// * identity switches: each link is marked with probability
///   `id_switch_rate`; marked links swap their target persons pairwise in
///   order. An odd marked link left over swaps with a random unmarked one,
///   so a switch never produces a duplicated target.
///
/// With both knobs at zero this returns the ground-truth links unchanged.
pub fn corrupt_tracks(
    scenario: &Scenario,
    id_switch_rate: f64,
    confidence_noise_sigma: f64,
    seed: u64,
) -> Result<TemporalLinkSet> {
    if !(0.0..=1.0).contains(&id_switch_rate) {
        return Err(Error::config("id_switch_rate", "must lie in [0, 1]"));
    }
    if !(confidence_noise_sigma >= 0.0) {
        return Err(Error::config("confidence_noise_sigma", "must be non-negative"));
    }

    let mut rng = substream(seed, "tracking");
    let frames: Vec<_> = scenario.frames().collect();
    let mut links: Vec<TemporalLink> = Vec::new();

    for pair in frames.windows(2) {
        let (f, g) = (pair[0], pair[1]);
        let here = scenario.persons_at(f);
        let there = scenario.persons_at(g);
        let mut frame_links: Vec<TemporalLink> = Vec::new();
        for &p in here.intersection(&there) {
            // The noise draw happens for every link so the stream position
            // does not depend on sigma.
            let z: f64 = rng.sample(StandardNormal);
            let p_t = (1.0 - (confidence_noise_sigma * z).abs()).clamp(0.0, 1.0);
            frame_links.push(TemporalLink { frame: f, a: p, b: p, p_t });
        }

        let marked: Vec<usize> = (0..frame_links.len())
            .filter(|_| rng.gen::<f64>() < id_switch_rate)
            .collect();
        for chunk in marked.chunks(2) {
            match *chunk {
                [i, j] => {
                    let (bi, bj) = (frame_links[i].b, frame_links[j].b);
                    frame_links[i].b = bj;
                    frame_links[j].b = bi;
                }
                [i] if frame_links.len() >= 2 => {
                    let mut j = rng.gen_range(0..frame_links.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    let (bi, bj) = (frame_links[i].b, frame_links[j].b);
                    frame_links[i].b = bj;
                    frame_links[j].b = bi;
                }
                _ => {}
            }
        }
        links.extend(frame_links);
    }

    let set = TemporalLinkSet { links };
    set.check_consistency()?;
    Ok(set)
}

/// The uncorrupted identity links of a scenario: every person present in two
/// consecutive frames, linked to itself with probability 1.
pub fn ground_truth_links(scenario: &Scenario) -> TemporalLinkSet {
    corrupt_tracks(scenario, 0.0, 0.0, scenario.seed)
        .expect("zero corruption rates are always valid")
}
