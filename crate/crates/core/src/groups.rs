//! From partitions to groups.
//!
//! A clustering of the temporal groupness graph projects onto each frame as
//! a set of groups (nodes of that frame sharing a community). A dynamic
//! result collapses to one static group set by the frame-count selection
//! rule: count the frames in which each exact member set appears, take the
//! most frequent sets first, keep them disjoint, and cover anyone left over
//! with singletons.

use crate::clustering::Partition;
use crate::error::{Error, Result};
use crate::graph::TemporalGroupnessGraph;
use crate::ids::{FrameId, PersonId};
use crate::sim::Scenario;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Per-frame group structure: every frame holds a disjoint cover of the
/// persons present there. Singleton groups are ordinary groups.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicGroups {
    pub per_frame: BTreeMap<FrameId, Vec<BTreeSet<PersonId>>>,
}

impl DynamicGroups {
    /// Ground-truth dynamic groups of a scenario.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        DynamicGroups { per_frame: scenario.gt_partitions.clone() }
    }

    /// Every person appearing in any frame.
    pub fn all_persons(&self) -> BTreeSet<PersonId> {
        self.per_frame
            .values()
            .flat_map(|groups| groups.iter().flatten().copied())
            .collect()
    }

    /// Each frame's groups must be disjoint and non-empty.
    pub fn check_consistency(&self) -> Result<()> {
        for (frame, groups) in &self.per_frame {
            let mut seen: BTreeSet<PersonId> = BTreeSet::new();
            for g in groups {
                if g.is_empty() {
                    return Err(Error::Inconsistency(format!("empty group at frame {frame}")));
                }
                for p in g {
                    if !seen.insert(*p) {
                        return Err(Error::Inconsistency(format!(
                            "person {p} in two groups at frame {frame}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One group set for a whole video: a partition of everyone who appears.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticGroups {
    pub groups: Vec<BTreeSet<PersonId>>,
}

impl StaticGroups {
    /// Every person in any group.
    pub fn all_persons(&self) -> BTreeSet<PersonId> {
        self.groups.iter().flatten().copied().collect()
    }

    /// Groups must be disjoint and non-empty.
    pub fn check_consistency(&self) -> Result<()> {
        let mut seen: BTreeSet<PersonId> = BTreeSet::new();
        for g in &self.groups {
            if g.is_empty() {
                return Err(Error::Inconsistency("empty static group".into()));
            }
            for p in g {
                if !seen.insert(*p) {
                    return Err(Error::Inconsistency(format!("person {p} in two static groups")));
                }
            }
        }
        Ok(())
    }
}

/// Project a community partition of the temporal graph onto frames: the
/// nodes of frame `f` sharing a community label become one group of `f`.
///
/// The partition must cover every graph node; the output inherits the
/// disjoint-cover invariant from the partition being a function of nodes.
pub fn partition_to_dynamic(
    partition: &Partition,
    graph: &TemporalGroupnessGraph,
) -> Result<DynamicGroups> {
    let mut per_frame: BTreeMap<FrameId, BTreeMap<usize, BTreeSet<PersonId>>> = BTreeMap::new();
    for node in &graph.nodes {
        let label = partition.assignment.get(node).copied().ok_or_else(|| {
            Error::Inconsistency(format!("partition does not cover node {node}"))
        })?;
        per_frame
            .entry(node.frame)
            .or_default()
            .entry(label)
            .or_default()
            .insert(node.person);
    }
    let dynamic = DynamicGroups {
        per_frame: per_frame
            .into_iter()
            .map(|(frame, by_label)| {
                let mut groups: Vec<BTreeSet<PersonId>> = by_label.into_values().collect();
                groups.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
                (frame, groups)
            })
            .collect(),
    };
    debug_assert!(dynamic.check_consistency().is_ok());
    Ok(dynamic)
}

/// Collapse dynamic groups to a static group set.
///
/// Groups are identified by exact member set. Sets are sorted by the number
/// of frames they appear in (descending; ties to the larger set, then
/// lexicographic members) and selected in that order, skipping sets that
/// intersect an earlier selection, until everyone is covered. Persons still
/// uncovered after the sweep become singletons.
pub fn dynamic_to_static(dynamic: &DynamicGroups) -> Result<StaticGroups> {
    if dynamic.per_frame.is_empty() {
        return Err(Error::InvalidInput("no frames to aggregate groups over".into()));
    }
    let mut frame_counts: BTreeMap<&BTreeSet<PersonId>, u32> = BTreeMap::new();
    for groups in dynamic.per_frame.values() {
        for g in groups {
            *frame_counts.entry(g).or_insert(0) += 1;
        }
    }
    let mut candidates: Vec<(&BTreeSet<PersonId>, u32)> = frame_counts.into_iter().collect();
    candidates.sort_by(|(ga, ca), (gb, cb)| {
        cb.cmp(ca)
            .then(gb.len().cmp(&ga.len()))
            .then(ga.cmp(gb))
    });

    let everyone = dynamic.all_persons();
    let mut covered: BTreeSet<PersonId> = BTreeSet::new();
    let mut selected: Vec<BTreeSet<PersonId>> = Vec::new();
    for (group, _) in candidates {
        if covered.len() == everyone.len() {
            break;
        }
        if group.iter().any(|p| covered.contains(p)) {
            continue;
        }
        covered.extend(group.iter().copied());
        selected.push(group.clone());
    }
    for p in everyone.difference(&covered) {
        selected.push(BTreeSet::from([*p]));
    }
    selected.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    Ok(StaticGroups { groups: selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{louvain, ModularityParams};
    use crate::graph::{build_framewise, link_temporal, NodeId};
    use crate::groupness::PairObservation;
    use crate::sim::{TemporalLink, TemporalLinkSet};
    use proptest::prelude::*;

    fn group(ids: &[u32]) -> BTreeSet<PersonId> {
        ids.iter().copied().map(PersonId).collect()
    }

    /// Dynamic groups holding the given partitions for the given numbers of
    /// consecutive frames.
    fn dynamic(phases: &[(&[&[u32]], u32)]) -> DynamicGroups {
        let mut per_frame = BTreeMap::new();
        let mut frame = 1u32;
        for (partition, frames) in phases {
            for _ in 0..*frames {
                per_frame.insert(
                    FrameId(frame),
                    partition.iter().map(|ids| group(ids)).collect(),
                );
                frame += 1;
            }
        }
        DynamicGroups { per_frame }
    }

    fn two_frame_graph(partition_labels: &[(u32, u32, usize)]) -> (Partition, TemporalGroupnessGraph) {
        // Build a 2-frame graph over persons 1..=4 with identity links and
        // no spatial edges, plus the given (frame, person) -> label map.
        let frames: Vec<TemporalGroupnessGraph> = [1u32, 2]
            .iter()
            .map(|&f| {
                build_framewise(FrameId(f), &[], &(1..=4).map(PersonId).collect()).unwrap()
            })
            .collect();
        let links = TemporalLinkSet {
            links: (1..=4)
                .map(|p| TemporalLink {
                    frame: FrameId(1),
                    a: PersonId(p),
                    b: PersonId(p),
                    p_t: 1.0,
                })
                .collect(),
        };
        let graph = link_temporal(&frames, &links, 1.0).unwrap();
        let partition = Partition {
            assignment: partition_labels
                .iter()
                .map(|&(f, p, l)| (NodeId::new(FrameId(f), PersonId(p)), l))
                .collect(),
        };
        (partition, graph)
    }

    #[test]
    fn projection_groups_nodes_by_community_per_frame() {
        let (partition, graph) = two_frame_graph(&[
            (1, 1, 0), (1, 2, 0), (1, 3, 1), (1, 4, 1),
            (2, 1, 0), (2, 2, 0), (2, 3, 1), (2, 4, 1),
        ]);
        let dynamic = partition_to_dynamic(&partition, &graph).unwrap();
        for f in [1, 2] {
            assert_eq!(
                dynamic.per_frame[&FrameId(f)],
                vec![group(&[1, 2]), group(&[3, 4])],
            );
        }
    }

    #[test]
    fn projection_shows_membership_changes_between_frames() {
        // Person 3 switches communities between the frames.
        let (partition, graph) = two_frame_graph(&[
            (1, 1, 0), (1, 2, 0), (1, 3, 1), (1, 4, 1),
            (2, 1, 0), (2, 2, 0), (2, 3, 0), (2, 4, 1),
        ]);
        let dynamic = partition_to_dynamic(&partition, &graph).unwrap();
        assert_eq!(
            dynamic.per_frame[&FrameId(1)],
            vec![group(&[1, 2]), group(&[3, 4])],
        );
        assert_eq!(
            dynamic.per_frame[&FrameId(2)],
            vec![group(&[1, 2, 3]), group(&[4])],
        );
    }

    #[test]
    fn projection_handles_all_singletons() {
        let (partition, graph) = two_frame_graph(&[
            (1, 1, 0), (1, 2, 1), (1, 3, 2), (1, 4, 3),
            (2, 1, 0), (2, 2, 1), (2, 3, 2), (2, 4, 3),
        ]);
        let dynamic = partition_to_dynamic(&partition, &graph).unwrap();
        assert_eq!(
            dynamic.per_frame[&FrameId(1)],
            vec![group(&[1]), group(&[2]), group(&[3]), group(&[4])],
        );
    }

    #[test]
    fn projection_rejects_uncovered_nodes() {
        let (mut partition, graph) = two_frame_graph(&[
            (1, 1, 0), (1, 2, 0), (1, 3, 1), (1, 4, 1),
            (2, 1, 0), (2, 2, 0), (2, 3, 0), (2, 4, 1),
        ]);
        partition.assignment.remove(&NodeId::new(FrameId(2), PersonId(4)));
        assert!(matches!(
            partition_to_dynamic(&partition, &graph),
            Err(Error::Inconsistency(_))
        ));
    }

    #[test]
    fn static_selection_follows_frame_counts() {
        // {1,2} seen in 5 frames, {3} in 4, {1,2,3} in 2 (person 3 absent
        // in the last frame): select {1,2}, then {3}, everyone covered.
        let dynamic = dynamic(&[
            (&[&[1, 2], &[3]], 4),
            (&[&[1, 2, 3]], 2),
            (&[&[1, 2]], 1),
        ]);
        let stat = dynamic_to_static(&dynamic).unwrap();
        assert_eq!(stat.groups, vec![group(&[1, 2]), group(&[3])]);
    }

    #[test]
    fn static_selection_is_identity_for_constant_groups() {
        let dynamic = dynamic(&[(&[&[1, 2], &[3, 4, 5], &[6]], 10)]);
        let stat = dynamic_to_static(&dynamic).unwrap();
        assert_eq!(
            stat.groups,
            vec![group(&[1, 2]), group(&[3, 4, 5]), group(&[6])],
        );
    }

    #[test]
    fn static_selection_skips_overlaps_and_appends_singletons() {
        // A={1,2} in 5 frames, C={2,3} in 3 frames, person 3 singleton in
        // the frames where A appears, person 1 singleton alongside C.
        let first = dynamic(&[
            (&[&[1, 2], &[3]], 5),
            (&[&[2, 3], &[1]], 3),
        ]);
        // Counts: {1,2} 5, {3} 5, {2,3} 3, {1} 3. Selection: {1,2}, then
        // {3}; everyone covered; {2,3} would have been skipped anyway.
        let stat = dynamic_to_static(&first).unwrap();
        assert_eq!(stat.groups, vec![group(&[1, 2]), group(&[3])]);

        // Force the skip path: {2,3} outnumbers {1,2}, so {1,2} is skipped
        // for intersecting it and person 1 comes back as a singleton.
        let second = dynamic(&[
            (&[&[1, 2], &[3]], 5),
            (&[&[2, 3], &[1]], 6),
        ]);
        // Counts: {2,3} 6, {1} 6, {1,2} 5, {3} 5. Select {1} and {2,3}.
        let stat = dynamic_to_static(&second).unwrap();
        assert_eq!(stat.groups, vec![group(&[1]), group(&[2, 3])]);
    }

    #[test]
    fn static_selection_breaks_count_ties_by_size_then_members() {
        // {1,2,3} and {4,5} both appear twice; the larger set goes first,
        // but both get selected; {6} covers the rest.
        let dynamic = dynamic(&[(&[&[1, 2, 3], &[4, 5], &[6]], 2)]);
        let stat = dynamic_to_static(&dynamic).unwrap();
        assert_eq!(
            stat.groups,
            vec![group(&[1, 2, 3]), group(&[4, 5]), group(&[6])],
        );
    }

    #[test]
    fn static_selection_requires_frames() {
        assert!(dynamic_to_static(&DynamicGroups::default()).is_err());
    }

    #[test]
    fn clusterer_projection_is_always_a_partition() {
        // End to end on a real clustering result.
        let graph = {
            let obs = |f: u32, a: u32, b: u32, p_g: f64| PairObservation {
                frame: FrameId(f),
                a: PersonId(a),
                b: PersonId(b),
                p_i: 1.0 - p_g,
                p_g,
            };
            let frames: Vec<TemporalGroupnessGraph> = [1u32, 2, 3]
                .iter()
                .map(|&f| {
                    build_framewise(
                        FrameId(f),
                        &[obs(f, 1, 2, 0.9), obs(f, 1, 3, 0.2), obs(f, 2, 3, 0.1)],
                        &(1..=3).map(PersonId).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let links = TemporalLinkSet {
                links: [1u32, 2]
                    .iter()
                    .flat_map(|&f| {
                        (1..=3).map(move |p| TemporalLink {
                            frame: FrameId(f),
                            a: PersonId(p),
                            b: PersonId(p),
                            p_t: 1.0,
                        })
                    })
                    .collect(),
            };
            link_temporal(&frames, &links, 1.0).unwrap()
        };
        let partition = louvain(&graph, &ModularityParams::default(), 17).unwrap();
        let dynamic = partition_to_dynamic(&partition, &graph).unwrap();
        dynamic.check_consistency().unwrap();
        for frame in [1, 2, 3] {
            let present: BTreeSet<PersonId> = dynamic.per_frame[&FrameId(frame)]
                .iter()
                .flatten()
                .copied()
                .collect();
            assert_eq!(present, (1..=3).map(PersonId).collect::<BTreeSet<_>>());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// dynamic_to_static always returns a disjoint cover of everyone.
        #[test]
        fn prop_static_output_is_a_partition(
            memberships in prop::collection::vec(
                prop::collection::vec(0..5usize, 6),
                1..6,
            ),
        ) {
            // Each inner vec maps person index -> community at one frame.
            let mut per_frame = BTreeMap::new();
            for (f, labels) in memberships.iter().enumerate() {
                let mut by_label: BTreeMap<usize, BTreeSet<PersonId>> = BTreeMap::new();
                for (p, &l) in labels.iter().enumerate() {
                    by_label.entry(l).or_default().insert(PersonId(p as u32 + 1));
                }
                per_frame.insert(
                    FrameId(f as u32 + 1),
                    by_label.into_values().collect::<Vec<_>>(),
                );
            }
            let dynamic = DynamicGroups { per_frame };
            let stat = dynamic_to_static(&dynamic).unwrap();
            let mut covered: BTreeSet<PersonId> = BTreeSet::new();
            for g in &stat.groups {
                for p in g {
                    prop_assert!(covered.insert(*p), "person {} twice", p);
                }
            }
            prop_assert_eq!(covered, dynamic.all_persons());
        }
    }
}
