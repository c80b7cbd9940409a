//! Half-overlap evaluation of detected groups against ground truth.
//!
//! A detected group and a ground-truth group match when the overlap ratio
//! |det ∩ gt| / max(|det|, |gt|) strictly exceeds the threshold (default
//! 0.5). Detections and ground truths are paired one-to-one, greedily by
//! descending ratio; matched pairs are true positives, leftover detections
//! false positives, leftover ground truths false negatives. Dynamic results
//! are scored per frame and micro-aggregated: every frame's counts are
//! summed before precision, recall and F1 are computed, so frames with many
//! groups weigh more than frames with few.
//!
//! Singleton groups are excluded by default: under the half-overlap
//! criterion a singleton either matches exactly or not at all, and counting
//! every lone walker as a trivially correct detection inflates both
//! precision and recall. Set `include_singletons` to score them anyway.

use crate::error::{Error, Result};
use crate::groups::{DynamicGroups, StaticGroups};
use crate::ids::{FrameId, PersonId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Scheme for pairing detected groups with ground-truth groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Pairs sorted by descending overlap ratio (ties to the smaller
    /// detection index, then the smaller ground-truth index); each group
    /// matches at most once.
    #[default]
    GreedyOneToOne,
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// A pair counts as a match when its overlap ratio strictly exceeds
    /// this. Must lie in (0, 1]; at the value itself the pair does not
    /// match, so the default 0.5 implements "more than half overlap".
    pub overlap_threshold: f64,
    /// Whether groups of one person participate, on either side.
    pub include_singletons: bool,
    pub matching: Matching,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            overlap_threshold: 0.5,
            include_singletons: false,
            matching: Matching::GreedyOneToOne,
        }
    }
}

impl EvalConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::config(
                "overlap_threshold",
                format!("must lie in (0, 1], got {}", self.overlap_threshold),
            ));
        }
        Ok(())
    }
}

/// Match counts and scores of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: FrameId,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Aggregate outcome of an evaluation.
///
/// `precision = tp / (tp + fp)` and `recall = tp / (tp + fn)`, each 0 when
/// its denominator is 0; `f1` is their harmonic mean, 0 when both are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Per-frame breakdown; present for dynamic evaluations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_frame: Option<Vec<FrameEval>>,
}

fn scores(tp: u32, fp: u32, fn_: u32) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { f64::from(tp) / f64::from(tp + fp) };
    let recall = if tp + fn_ == 0 { 0.0 } else { f64::from(tp) / f64::from(tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Overlap ratio |det ∩ gt| / max(|det|, |gt|) of two non-empty groups.
pub fn overlap_ratio(det: &BTreeSet<PersonId>, gt: &BTreeSet<PersonId>) -> Result<f64> {
    if det.is_empty() || gt.is_empty() {
        return Err(Error::InvalidInput("overlap ratio of an empty group".into()));
    }
    let intersection = det.intersection(gt).count();
    Ok(intersection as f64 / det.len().max(gt.len()) as f64)
}

/// Groups that take part in matching under the config.
fn eligible<'a>(groups: &'a [BTreeSet<PersonId>], cfg: &EvalConfig) -> Vec<&'a BTreeSet<PersonId>> {
    groups.iter().filter(|g| cfg.include_singletons || g.len() > 1).collect()
}

/// Greedy one-to-one matching of detections to ground truths. Only pairs
/// whose ratio exceeds the threshold are candidates; the return is
/// (tp, fp, fn).
fn match_groups(
    dets: &[&BTreeSet<PersonId>],
    gts: &[&BTreeSet<PersonId>],
    cfg: &EvalConfig,
) -> Result<(u32, u32, u32)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (di, det) in dets.iter().enumerate() {
        for (gi, gt) in gts.iter().enumerate() {
            let ratio = overlap_ratio(det, gt)?;
            if ratio > cfg.overlap_threshold {
                candidates.push((ratio, di, gi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("overlap ratios are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut det_matched = vec![false; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    let mut tp = 0u32;
    for (_, di, gi) in candidates {
        if !det_matched[di] && !gt_matched[gi] {
            det_matched[di] = true;
            gt_matched[gi] = true;
            tp += 1;
        }
    }
    let fp = det_matched.iter().filter(|m| !**m).count() as u32;
    let fn_ = gt_matched.iter().filter(|m| !**m).count() as u32;
    Ok((tp, fp, fn_))
}

/// Score one static group set against another.
pub fn evaluate_static(
    dets: &StaticGroups,
    gts: &StaticGroups,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.check()?;
    dets.check_consistency()?;
    gts.check_consistency()?;
    let (tp, fp, fn_) = match_groups(&eligible(&dets.groups, cfg), &eligible(&gts.groups, cfg), cfg)?;
    let (precision, recall, f1) = scores(tp, fp, fn_);
    Ok(EvalReport { tp, fp, fn_, precision, recall, f1, per_frame: None })
}

/// Score dynamic groups frame by frame and micro-aggregate the counts.
/// Both sides must cover exactly the same frames.
pub fn evaluate_dynamic(
    dets: &DynamicGroups,
    gts: &DynamicGroups,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.check()?;
    dets.check_consistency()?;
    gts.check_consistency()?;
    let det_frames: Vec<FrameId> = dets.per_frame.keys().copied().collect();
    let gt_frames: Vec<FrameId> = gts.per_frame.keys().copied().collect();
    if det_frames != gt_frames {
        return Err(Error::InvalidInput(format!(
            "detected and ground-truth frame sets differ ({} vs {} frames)",
            det_frames.len(),
            gt_frames.len()
        )));
    }

    let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
    let mut per_frame = Vec::with_capacity(det_frames.len());
    for frame in det_frames {
        let (frame_tp, frame_fp, frame_fn) = match_groups(
            &eligible(&dets.per_frame[&frame], cfg),
            &eligible(&gts.per_frame[&frame], cfg),
            cfg,
        )?;
        tp += frame_tp;
        fp += frame_fp;
        fn_ += frame_fn;
        let (precision, recall, f1) = scores(frame_tp, frame_fp, frame_fn);
        per_frame.push(FrameEval {
            frame,
            tp: frame_tp,
            fp: frame_fp,
            fn_: frame_fn,
            precision,
            recall,
            f1,
        });
    }
    let (precision, recall, f1) = scores(tp, fp, fn_);
    Ok(EvalReport { tp, fp, fn_, precision, recall, f1, per_frame: Some(per_frame) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn group(ids: &[u32]) -> BTreeSet<PersonId> {
        ids.iter().copied().map(PersonId).collect()
    }

    fn static_groups(sets: &[&[u32]]) -> StaticGroups {
        StaticGroups { groups: sets.iter().map(|ids| group(ids)).collect() }
    }

    fn dynamic_groups(frames: &[(u32, &[&[u32]])]) -> DynamicGroups {
        let mut per_frame = BTreeMap::new();
        for (frame, sets) in frames {
            per_frame.insert(FrameId(*frame), sets.iter().map(|ids| group(ids)).collect());
        }
        DynamicGroups { per_frame }
    }

    #[test]
    fn overlap_ratio_examples() {
        let r = overlap_ratio(&group(&[1, 2, 3]), &group(&[1, 2])).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap_ratio(&group(&[1, 2]), &group(&[1, 2])).unwrap(), 1.0);
        assert_eq!(overlap_ratio(&group(&[1, 2]), &group(&[1, 2, 3, 4])).unwrap(), 0.5);
        assert_eq!(overlap_ratio(&group(&[1, 2]), &group(&[3, 4])).unwrap(), 0.0);
    }

    #[test]
    fn overlap_ratio_rejects_empty_sets() {
        assert!(overlap_ratio(&group(&[]), &group(&[1])).is_err());
        assert!(overlap_ratio(&group(&[1]), &group(&[])).is_err());
    }

    #[test]
    fn half_overlap_boundary_is_not_a_match() {
        // Ratio exactly 0.5 must not count: the criterion is strictly
        // more than half.
        let report = evaluate_static(
            &static_groups(&[&[1, 2]]),
            &static_groups(&[&[1, 2, 3, 4]]),
            &EvalConfig::default(),
        )
        .unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (0, 1, 1));
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn static_merge_scores_depend_on_singleton_handling() {
        let dets = static_groups(&[&[1, 2, 3]]);
        let gts = static_groups(&[&[1, 2], &[3]]);

        // Excluded (default): gt {3} is dropped, the merged detection still
        // covers {1,2} at ratio 2/3, so the result is perfect.
        let report = evaluate_static(&dets, &gts, &EvalConfig::default()).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (1, 0, 0));
        assert_eq!((report.precision, report.recall, report.f1), (1.0, 1.0, 1.0));

        // Included: {3} goes unmatched and costs recall.
        let cfg = EvalConfig { include_singletons: true, ..EvalConfig::default() };
        let report = evaluate_static(&dets, &gts, &cfg).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (1, 0, 1));
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 0.5);
        assert!((report.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_score_perfectly() {
        let x = static_groups(&[&[1, 2], &[3, 4, 5], &[6]]);
        for include in [false, true] {
            let cfg = EvalConfig { include_singletons: include, ..EvalConfig::default() };
            let report = evaluate_static(&x, &x, &cfg).unwrap();
            assert_eq!(report.f1, 1.0);
            assert_eq!(report.fp, 0);
            assert_eq!(report.fn_, 0);
        }
    }

    #[test]
    fn matching_prefers_smaller_detection_index_on_ties() {
        // Three candidate pairs, all at ratio 0.5 with threshold 0.4:
        // (d0,g0), (d1,g0), (d1,g1). Taking d0-g0 first leaves d1 free for
        // g1, so everything matches; the opposite tie-break would strand
        // d0 and g1.
        let dets = static_groups(&[&[1, 2], &[3, 4]]);
        let gts = static_groups(&[&[1, 3], &[4, 5]]);
        let cfg = EvalConfig { overlap_threshold: 0.4, ..EvalConfig::default() };
        let report = evaluate_static(&dets, &gts, &cfg).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (2, 0, 0));
    }

    #[test]
    fn config_rejects_thresholds_outside_unit_interval() {
        for bad in [0.0, -0.5, 1.5, f64::NAN] {
            let cfg = EvalConfig { overlap_threshold: bad, ..EvalConfig::default() };
            assert!(cfg.check().is_err(), "threshold {bad} should be rejected");
        }
        let cfg = EvalConfig { overlap_threshold: 1.0, ..EvalConfig::default() };
        cfg.check().unwrap();
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        let overlapping = StaticGroups { groups: vec![group(&[1, 2]), group(&[2, 3])] };
        let ok = static_groups(&[&[1, 2]]);
        assert!(evaluate_static(&overlapping, &ok, &EvalConfig::default()).is_err());
        assert!(evaluate_static(&ok, &overlapping, &EvalConfig::default()).is_err());
    }

    #[test]
    fn dynamic_micro_aggregation_sums_counts_before_scoring() {
        // Frame 1 perfect (one TP); frame 2 a disjoint detection (one FP,
        // one FN). Micro: P = 1/2, R = 1/2, F1 = 1/2.
        let dets = dynamic_groups(&[(1, &[&[1, 2]]), (2, &[&[1, 2]])]);
        let gts = dynamic_groups(&[(1, &[&[1, 2]]), (2, &[&[3, 4]])]);
        let report = evaluate_dynamic(&dets, &gts, &EvalConfig::default()).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (1, 1, 1));
        assert_eq!((report.precision, report.recall, report.f1), (0.5, 0.5, 0.5));

        let per_frame = report.per_frame.unwrap();
        assert_eq!(per_frame.len(), 2);
        assert_eq!(per_frame[0].frame, FrameId(1));
        assert_eq!(per_frame[0].f1, 1.0);
        assert_eq!(per_frame[1].f1, 0.0);
    }

    #[test]
    fn dynamic_perfect_detection_scores_one_everywhere() {
        let gts = dynamic_groups(&[(1, &[&[1, 2], &[3, 4]]), (2, &[&[1, 2, 3, 4]])]);
        let report = evaluate_dynamic(&gts, &gts, &EvalConfig::default()).unwrap();
        assert_eq!(report.f1, 1.0);
        assert!(report.per_frame.unwrap().iter().all(|f| f.f1 == 1.0));
    }

    #[test]
    fn split_blind_detector_loses_recall_after_the_split() {
        // Ground truth splits {1,2,3,4} into {1,2} and {3,4} at frame 6;
        // one detector never splits, the other follows the truth.
        let mut gt_frames: Vec<(u32, &[&[u32]])> = Vec::new();
        for f in 1..=5 {
            gt_frames.push((f, &[&[1, 2, 3, 4]]));
        }
        for f in 6..=10 {
            gt_frames.push((f, &[&[1, 2], &[3, 4]]));
        }
        let gts = dynamic_groups(&gt_frames);
        let all_in_one: &[&[u32]] = &[&[1, 2, 3, 4]];
        let constant_frames: Vec<(u32, &[&[u32]])> = (1..=10).map(|f| (f, all_in_one)).collect();
        let constant = dynamic_groups(&constant_frames);
        let aware = gts.clone();

        let cfg = EvalConfig::default();
        let blind = evaluate_dynamic(&constant, &gts, &cfg).unwrap();
        let sharp = evaluate_dynamic(&aware, &gts, &cfg).unwrap();

        // Post-split the constant detection overlaps each half at exactly
        // 0.5, which the strict criterion rejects.
        assert_eq!((blind.tp, blind.fp, blind.fn_), (5, 5, 10));
        assert!((blind.recall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(sharp.recall, 1.0);
        assert!(blind.recall < sharp.recall);
    }

    #[test]
    fn dynamic_requires_matching_frame_sets() {
        let dets = dynamic_groups(&[(1, &[&[1, 2]])]);
        let gts = dynamic_groups(&[(1, &[&[1, 2]]), (2, &[&[1, 2]])]);
        assert!(evaluate_dynamic(&dets, &gts, &EvalConfig::default()).is_err());
    }

    /// Random partition of persons 0..n via independent label draws.
    fn partition_strategy(n: u32) -> impl Strategy<Value = Vec<BTreeSet<PersonId>>> {
        proptest::collection::vec(0..n, n as usize).prop_map(|labels| {
            let mut by_label: BTreeMap<u32, BTreeSet<PersonId>> = BTreeMap::new();
            for (p, label) in labels.into_iter().enumerate() {
                by_label.entry(label).or_default().insert(PersonId(p as u32));
            }
            by_label.into_values().collect()
        })
    }

    proptest! {
        #[test]
        fn prop_report_invariants_and_spurious_detections(
            dets in partition_strategy(8),
            gts in partition_strategy(8),
            include in any::<bool>(),
            threshold in 0.05f64..=1.0,
        ) {
            let cfg = EvalConfig {
                overlap_threshold: threshold,
                include_singletons: include,
                ..EvalConfig::default()
            };
            let det_set = StaticGroups { groups: dets.clone() };
            let gt_set = StaticGroups { groups: gts.clone() };
            let base = evaluate_static(&det_set, &gt_set, &cfg).unwrap();

            for value in [base.precision, base.recall, base.f1] {
                prop_assert!((0.0..=1.0).contains(&value));
            }
            prop_assert_eq!(base.f1 == 0.0, base.tp == 0);
            let n_dets = eligible(&det_set.groups, &cfg).len() as u32;
            let n_gts = eligible(&gt_set.groups, &cfg).len() as u32;
            prop_assert!(base.tp <= n_dets.min(n_gts));
            prop_assert_eq!(base.tp + base.fp, n_dets);
            prop_assert_eq!(base.tp + base.fn_, n_gts);

            // Perfect self-evaluation whenever anything survives filtering.
            let self_eval = evaluate_static(&det_set, &det_set, &cfg).unwrap();
            if n_dets > 0 {
                prop_assert_eq!(self_eval.f1, 1.0);
            } else {
                prop_assert_eq!(self_eval.tp, 0);
            }

            // A detection of people unknown to the ground truth can only
            // hurt precision and never changes the matches.
            let mut padded = dets.clone();
            padded.push(group(&[100, 101]));
            let spurious =
                evaluate_static(&StaticGroups { groups: padded }, &gt_set, &cfg).unwrap();
            prop_assert_eq!(spurious.tp, base.tp);
            prop_assert!(spurious.precision <= base.precision + 1e-12);
        }

        #[test]
        fn prop_removing_a_detection_never_raises_recall(
            dets in partition_strategy(7),
            gts in partition_strategy(7),
            include in any::<bool>(),
            threshold in 0.05f64..=1.0,
        ) {
            let cfg = EvalConfig {
                overlap_threshold: threshold,
                include_singletons: include,
                ..EvalConfig::default()
            };
            let gt_set = StaticGroups { groups: gts };
            let base =
                evaluate_static(&StaticGroups { groups: dets.clone() }, &gt_set, &cfg).unwrap();
            for drop in 0..dets.len() {
                let mut fewer = dets.clone();
                fewer.remove(drop);
                let report =
                    evaluate_static(&StaticGroups { groups: fewer }, &gt_set, &cfg).unwrap();
                prop_assert!(report.recall <= base.recall + 1e-12);
            }
        }
    }
}
