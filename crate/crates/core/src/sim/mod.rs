//! Seeded synthetic scenes with ground-truth dynamic group structure.
//!
//! A scenario is a per-frame map of person states plus the ground-truth
//! partition of present persons into groups at every frame. Groups change
//! membership only at configured events (splits, merges, member transfers);
//! persons may enter and exit the scene; occlusion flips a per-state flag
//! that downstream features consume without removing the person.
//!
//! Motion model: every group follows an anchor performing a bounded 2-D
//! random walk (per-frame step capped at walking speed over the frame rate);
//! members hold formation offsets around the anchor and are pulled toward
//! them by a spring term with Gaussian jitter. Singleton groups reduce to
//! independent walks. Anchors of distinct groups are kept a configurable
//! minimum distance apart. At an event frame the affected anchors are
//! re-placed a configurable separation apart, clear of uninvolved groups, and
//! their members re-based instantly, so the observable behavior changes
//! exactly at the ground-truth event frame.

mod generate;
mod tracks;

pub use generate::simulate;
pub use tracks::{corrupt_tracks, ground_truth_links};

use crate::error::{Error, Result};
use crate::ids::{FrameId, PersonId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Hard cap on anchor speed: human walking pace, meters per second.
pub const MAX_WALK_SPEED_MPS: f64 = 1.5;

/// What happens to group membership at an event frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// One group becomes two or more.
    Split,
    /// Two or more groups become one.
    Merge,
    /// Members are reshuffled among two or more groups.
    MemberTransfer,
}

/// A scheduled change of group membership.
///
/// Sources must exactly match groups existing just before `frame`; the union
/// of source members equals the union of result members, and result groups
/// are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEvent {
    pub frame: FrameId,
    pub kind: EventKind,
    pub source_groups: Vec<BTreeSet<PersonId>>,
    pub result_groups: Vec<BTreeSet<PersonId>>,
}

/// Presence window for one person; outside it the person produces no state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceWindow {
    pub person: PersonId,
    pub first_frame: FrameId,
    pub last_frame: FrameId,
}

/// Knobs of the anchor-and-formation motion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    /// Anchor speed in meters per second; capped at [`MAX_WALK_SPEED_MPS`].
    pub anchor_speed_mps: f64,
    /// Std-dev of the per-frame heading change of an anchor, radians.
    pub turn_sigma: f64,
    /// Members sit on a circle of this radius around the anchor, meters.
    pub formation_radius: f64,
    /// Per-frame pull toward the formation slot, in (0, 1]; 1 tracks exactly.
    pub spring: f64,
    /// Anchors of distinct groups are kept at least this far apart, so that
    /// proximity stays informative about co-membership; 0 disables the
    /// constraint and allows "two groups nearby for a long time" negatives.
    pub min_anchor_separation: f64,
    /// Anchor distance created at a split (and expected scale of group
    /// spacing); also bounds how far a merge gathers its members from.
    pub event_separation: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            anchor_speed_mps: 1.0,
            turn_sigma: 0.5,
            formation_radius: 0.8,
            spring: 0.8,
            min_anchor_separation: 5.0,
            event_separation: 5.0,
        }
    }
}

fn default_fps() -> f64 {
    2.0
}

fn default_arena() -> [f64; 2] {
    [20.0, 20.0]
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_people: u32,
    pub num_frames: u32,
    /// Sampling rate of the scene, frames per second.
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Arena width and height in meters.
    #[serde(default = "default_arena")]
    pub arena: [f64; 2],
    /// Initial partition of all person ids into groups; singletons allowed.
    pub initial_groups: Vec<BTreeSet<PersonId>>,
    #[serde(default)]
    pub events: Vec<GroupEvent>,
    /// Std-dev of per-member position jitter, meters.
    #[serde(default)]
    pub position_noise_sigma: f64,
    /// Probability that a person is occluded in a frame.
    #[serde(default)]
    pub occlusion_rate: f64,
    /// Presence windows; persons without one are present in every frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_exit: Option<Vec<PresenceWindow>>,
    #[serde(default)]
    pub motion: MotionParams,
}

impl Default for SimConfig {
    /// A small clean scene: six people in three pairs, 30 frames, no
    /// noise, no events.
    fn default() -> Self {
        SimConfig {
            num_people: 6,
            num_frames: 30,
            fps: default_fps(),
            arena: default_arena(),
            initial_groups: vec![
                [PersonId(1), PersonId(2)].into_iter().collect(),
                [PersonId(3), PersonId(4)].into_iter().collect(),
                [PersonId(5), PersonId(6)].into_iter().collect(),
            ],
            events: Vec::new(),
            position_noise_sigma: 0.0,
            occlusion_rate: 0.0,
            entry_exit: None,
            motion: MotionParams::default(),
        }
    }
}

impl SimConfig {
    /// All person ids of the scene: `1..=num_people`.
    pub fn person_ids(&self) -> impl Iterator<Item = PersonId> + '_ {
        (1..=self.num_people).map(PersonId)
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = FrameId> + '_ {
        (1..=self.num_frames).map(FrameId)
    }

    /// First and last frame the person appears in.
    pub fn presence(&self, person: PersonId) -> (FrameId, FrameId) {
        if let Some(windows) = &self.entry_exit {
            if let Some(w) = windows.iter().find(|w| w.person == person) {
                return (w.first_frame, w.last_frame);
            }
        }
        (FrameId(1), FrameId(self.num_frames))
    }

    pub fn is_present(&self, person: PersonId, frame: FrameId) -> bool {
        let (first, last) = self.presence(person);
        first <= frame && frame <= last
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_people == 0 {
            return Err(Error::config("num_people", "must be at least 1"));
        }
        if self.num_frames == 0 {
            return Err(Error::config("num_frames", "must be at least 1"));
        }
        if !(self.fps > 0.0) {
            return Err(Error::config("fps", "must be positive"));
        }
        if !(self.arena[0] > 0.0 && self.arena[1] > 0.0) {
            return Err(Error::config("arena", "width and height must be positive"));
        }
        if !(self.position_noise_sigma >= 0.0) {
            return Err(Error::config("position_noise_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_rate) {
            return Err(Error::config("occlusion_rate", "must lie in [0, 1]"));
        }
        let m = &self.motion;
        if !(m.spring > 0.0 && m.spring <= 1.0) {
            return Err(Error::config("motion.spring", "must lie in (0, 1]"));
        }
        if !(m.anchor_speed_mps >= 0.0)
            || !(m.turn_sigma >= 0.0)
            || !(m.formation_radius >= 0.0)
            || !(m.min_anchor_separation >= 0.0)
            || !(m.event_separation > 0.0)
        {
            return Err(Error::config("motion", "speeds and radii must be non-negative, event_separation positive"));
        }

        // initial_groups must partition 1..=num_people.
        let everyone: BTreeSet<PersonId> = self.person_ids().collect();
        let mut seen: BTreeSet<PersonId> = BTreeSet::new();
        for (i, g) in self.initial_groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::config(
                    format!("initial_groups[{i}]"),
                    "group must not be empty",
                ));
            }
            for p in g {
                if !everyone.contains(p) {
                    return Err(Error::config(
                        format!("initial_groups[{i}]"),
                        format!("unknown person {p}"),
                    ));
                }
                if !seen.insert(*p) {
                    return Err(Error::config(
                        format!("initial_groups[{i}]"),
                        format!("person {p} appears in more than one group"),
                    ));
                }
            }
        }
        if seen != everyone {
            let missing: Vec<String> = everyone.difference(&seen).map(|p| p.to_string()).collect();
            return Err(Error::config(
                "initial_groups",
                format!("persons not covered: {}", missing.join(", ")),
            ));
        }

        if let Some(windows) = &self.entry_exit {
            let mut windowed: BTreeSet<PersonId> = BTreeSet::new();
            for (i, w) in windows.iter().enumerate() {
                if !everyone.contains(&w.person) {
                    return Err(Error::config(
                        format!("entry_exit[{i}]"),
                        format!("unknown person {}", w.person),
                    ));
                }
                if !windowed.insert(w.person) {
                    return Err(Error::config(
                        format!("entry_exit[{i}]"),
                        format!("person {} has more than one window", w.person),
                    ));
                }
                if w.first_frame.0 < 1
                    || w.last_frame.0 > self.num_frames
                    || w.first_frame > w.last_frame
                {
                    return Err(Error::config(
                        format!("entry_exit[{i}]"),
                        format!(
                            "window [{}, {}] must lie in [1, {}]",
                            w.first_frame, w.last_frame, self.num_frames
                        ),
                    ));
                }
            }
        }

        self.validate_events()?;
        Ok(())
    }

    /// Replay membership through the event list, checking each event against
    /// the partition it applies to.
    fn validate_events(&self) -> Result<()> {
        for (i, ev) in self.events.iter().enumerate() {
            let field = format!("events[{i}]");
            if ev.frame.0 < 1 || ev.frame.0 > self.num_frames {
                return Err(Error::config(
                    &field,
                    format!("frame {} outside [1, {}]", ev.frame, self.num_frames),
                ));
            }
            let src: BTreeSet<PersonId> = ev.source_groups.iter().flatten().copied().collect();
            let dst: BTreeSet<PersonId> = ev.result_groups.iter().flatten().copied().collect();
            if src != dst {
                return Err(Error::config(
                    &field,
                    "union of source members must equal union of result members",
                ));
            }
            let total: usize = ev.result_groups.iter().map(|g| g.len()).sum();
            if total != dst.len() {
                return Err(Error::config(&field, "result groups must be pairwise disjoint"));
            }
            if ev.result_groups.iter().any(|g| g.is_empty()) {
                return Err(Error::config(&field, "result groups must not be empty"));
            }
            let shape_ok = match ev.kind {
                EventKind::Split => ev.source_groups.len() == 1 && ev.result_groups.len() >= 2,
                EventKind::Merge => ev.source_groups.len() >= 2 && ev.result_groups.len() == 1,
                EventKind::MemberTransfer => {
                    ev.source_groups.len() >= 2 && ev.result_groups.len() >= 2
                }
            };
            if !shape_ok {
                return Err(Error::config(
                    &field,
                    format!("group counts do not match kind {:?}", ev.kind),
                ));
            }
        }

        // Replay in frame order, preserving list order within a frame.
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by_key(|&i| self.events[i].frame);
        let mut current: Vec<BTreeSet<PersonId>> = self.initial_groups.clone();
        for i in order {
            let ev = &self.events[i];
            for sg in &ev.source_groups {
                if !current.contains(sg) {
                    return Err(Error::config(
                        format!("events[{i}]"),
                        format!(
                            "source group {{{}}} does not exist at frame {}",
                            sg.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
                            ev.frame
                        ),
                    ));
                }
            }
            current.retain(|g| !ev.source_groups.contains(g));
            current.extend(ev.result_groups.iter().cloned());
        }
        Ok(())
    }
}

/// One person's state in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonState {
    pub person_id: PersonId,
    /// Position in meters.
    pub position: [f64; 2],
    /// Displacement since the previous frame, meters per frame.
    pub velocity: [f64; 2],
    /// Facing direction in [-pi, pi): the walking direction, or toward the
    /// group anchor when stationary.
    pub heading: f64,
    pub occluded: bool,
}

/// A generated scene: per-frame states and ground-truth partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// frame -> person -> state. Frames with no present persons keep an
    /// empty map so the frame axis stays contiguous.
    pub states: BTreeMap<FrameId, BTreeMap<PersonId, PersonState>>,
    /// frame -> partition of the persons present at that frame.
    pub gt_partitions: BTreeMap<FrameId, Vec<BTreeSet<PersonId>>>,
    pub seed: u64,
}

impl Scenario {
    pub fn frames(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.states.keys().copied()
    }

    pub fn num_frames(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, frame: FrameId, person: PersonId) -> Option<&PersonState> {
        self.states.get(&frame).and_then(|m| m.get(&person))
    }

    pub fn persons_at(&self, frame: FrameId) -> BTreeSet<PersonId> {
        self.states
            .get(&frame)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Every person appearing in any frame.
    pub fn all_persons(&self) -> BTreeSet<PersonId> {
        self.states.values().flat_map(|m| m.keys().copied()).collect()
    }

    /// Check the scenario's own invariants: each frame's partition is a
    /// disjoint cover of exactly the persons present there.
    pub fn check_consistency(&self) -> Result<()> {
        for (frame, groups) in &self.gt_partitions {
            let present = self.persons_at(*frame);
            let mut covered: BTreeSet<PersonId> = BTreeSet::new();
            for g in groups {
                for p in g {
                    if !covered.insert(*p) {
                        return Err(Error::Inconsistency(format!(
                            "person {p} in two ground-truth groups at frame {frame}"
                        )));
                    }
                }
            }
            if covered != present {
                return Err(Error::Inconsistency(format!(
                    "ground-truth partition at frame {frame} does not cover the present persons"
                )));
            }
        }
        Ok(())
    }
}

/// One identity link between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalLink {
    /// Source frame; the link connects `a` at `frame` to `b` at `frame + 1`.
    pub frame: FrameId,
    pub a: PersonId,
    pub b: PersonId,
    /// Identification probability in [0, 1].
    pub p_t: f64,
}

/// All identity links of a scene, as a tracker (or ground truth) reports them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalLinkSet {
    pub links: Vec<TemporalLink>,
}

impl TemporalLinkSet {
    /// At most one link per (frame, person) on each side, probabilities in range.
    pub fn check_consistency(&self) -> Result<()> {
        let mut sources: BTreeSet<(FrameId, PersonId)> = BTreeSet::new();
        let mut targets: BTreeSet<(FrameId, PersonId)> = BTreeSet::new();
        for l in &self.links {
            if !(0.0..=1.0).contains(&l.p_t) {
                return Err(Error::Inconsistency(format!(
                    "link p_t {} out of [0, 1] at frame {}",
                    l.p_t, l.frame
                )));
            }
            if !sources.insert((l.frame, l.a)) {
                return Err(Error::Inconsistency(format!(
                    "duplicate link source ({}, {})",
                    l.frame, l.a
                )));
            }
            if !targets.insert((l.frame, l.b)) {
                return Err(Error::Inconsistency(format!(
                    "duplicate link target ({}, {})",
                    l.frame, l.b
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
