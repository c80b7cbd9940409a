//! Scene generation: anchor walks, formations, and event application.

use super::{EventKind, PersonState, Scenario, SimConfig, MAX_WALK_SPEED_MPS};
use crate::error::Result;
use crate::ids::{FrameId, PersonId};
use crate::rng::substream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

/// One group being simulated. `id` is a creation counter so iteration order
/// (and with it RNG consumption) is stable across runs.
struct GroupState {
    id: u64,
    members: BTreeSet<PersonId>,
    anchor: [f64; 2],
    heading: f64,
    /// Formation slot of every member, relative to the anchor.
    offsets: BTreeMap<PersonId, [f64; 2]>,
    /// Frame the group was created in; members re-base instantly there.
    created_at: FrameId,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(TAU);
    if a >= PI {
        a -= TAU;
    }
    a
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Evenly spaced slots on a circle of `radius`, rotated by a random phase so
/// different groups are not mirror images of each other.
fn formation_offsets(
    members: &BTreeSet<PersonId>,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<PersonId, [f64; 2]> {
    let n = members.len();
    if n == 1 {
        let p = *members.iter().next().unwrap();
        // Consume the phase draw anyway so group sizes do not shift the stream.
        let _: f64 = rng.gen();
        return BTreeMap::from([(p, [0.0, 0.0])]);
    }
    let phase: f64 = rng.gen::<f64>() * TAU;
    members
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let a = phase + TAU * i as f64 / n as f64;
            (p, [radius * a.cos(), radius * a.sin()])
        })
        .collect()
}

fn clamp_to_arena(p: [f64; 2], arena: [f64; 2], margin: f64) -> [f64; 2] {
    let m = margin.min(arena[0] / 2.0).min(arena[1] / 2.0);
    [p[0].clamp(m, arena[0] - m), p[1].clamp(m, arena[1] - m)]
}

/// Upper bound on projection sweeps per frame. Each sweep revisits every
/// violating pair, so a handful converges for the group counts in play.
const MAX_SEPARATION_SWEEPS: usize = 12;

/// Push every pair of anchors at least `min_sep` apart while staying inside
/// the arena. Walls can absorb part of a direct push, in which case the
/// shortfall is made up by sliding sideways. Returns the pairs that were in
/// contact so the caller can deflect their walks. Deterministic: fixed sweep
/// order, no randomness.
fn separate_anchors(
    groups: &mut [GroupState],
    min_sep: f64,
    arena: [f64; 2],
    margin: f64,
) -> Vec<(usize, usize)> {
    let mut touched = Vec::new();
    for sweep in 0..MAX_SEPARATION_SWEEPS {
        let mut violated = false;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let d = dist(groups[i].anchor, groups[j].anchor);
                if d >= min_sep {
                    continue;
                }
                violated = true;
                if sweep == 0 {
                    touched.push((i, j));
                }
                let dir = if d > 1e-9 {
                    [
                        (groups[j].anchor[0] - groups[i].anchor[0]) / d,
                        (groups[j].anchor[1] - groups[i].anchor[1]) / d,
                    ]
                } else {
                    [1.0, 0.0]
                };
                let push = (min_sep - d) / 2.0 + 1e-9;
                groups[i].anchor = clamp_to_arena(
                    [
                        groups[i].anchor[0] - dir[0] * push,
                        groups[i].anchor[1] - dir[1] * push,
                    ],
                    arena,
                    margin,
                );
                groups[j].anchor = clamp_to_arena(
                    [
                        groups[j].anchor[0] + dir[0] * push,
                        groups[j].anchor[1] + dir[1] * push,
                    ],
                    arena,
                    margin,
                );
                if dist(groups[i].anchor, groups[j].anchor) + 1e-9 < min_sep {
                    slide_apart(groups, i, j, min_sep, arena, margin);
                }
            }
        }
        if !violated {
            break;
        }
    }
    touched
}

/// Restore `min_sep` between anchors `i` and `j` by moving one of them
/// perpendicular to the separation axis, for when a wall blocks the direct
/// push. Tries `j` then `i`, positive then negative side, and keeps the first
/// move that works; a cramped arena may leave the pair best-effort close.
fn slide_apart(
    groups: &mut [GroupState],
    i: usize,
    j: usize,
    min_sep: f64,
    arena: [f64; 2],
    margin: f64,
) {
    let a = groups[i].anchor;
    let b = groups[j].anchor;
    let d = dist(a, b);
    if d >= min_sep {
        return;
    }
    let dir = if d > 1e-9 {
        [(b[0] - a[0]) / d, (b[1] - a[1]) / d]
    } else {
        [1.0, 0.0]
    };
    let ortho = [-dir[1], dir[0]];
    // Perpendicular distance that brings the pair to exactly min_sep.
    let need = (min_sep * min_sep - d * d).max(0.0).sqrt() + 1e-9;
    for mover in [j, i] {
        let partner = if mover == j { a } else { b };
        for sign in [1.0, -1.0] {
            let cand = clamp_to_arena(
                [
                    groups[mover].anchor[0] + ortho[0] * need * sign,
                    groups[mover].anchor[1] + ortho[1] * need * sign,
                ],
                arena,
                margin,
            );
            if dist(cand, partner) + 1e-12 >= min_sep {
                groups[mover].anchor = cand;
                return;
            }
        }
    }
}

/// Generate a scenario from a validated config and a seed.
///
/// The same `(config, seed)` pair always produces the same scenario,
/// bit for bit; RNG draws happen in a fixed order regardless of which
/// branches fire.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;

    let mut motion_rng = substream(seed, "motion");
    let mut occl_rng = substream(seed, "occlusion");
    let arena = config.arena;
    let m = &config.motion;
    let margin = (m.formation_radius + 0.5).min(arena[0] / 4.0).min(arena[1] / 4.0);
    let step_len = m.anchor_speed_mps.min(MAX_WALK_SPEED_MPS) / config.fps;

    // Place initial anchors with pairwise separation when the arena allows it.
    let mut groups: Vec<GroupState> = Vec::new();
    let mut next_group_id: u64 = 0;
    for members in &config.initial_groups {
        let mut best: [f64; 2] = [arena[0] / 2.0, arena[1] / 2.0];
        let mut best_sep = -1.0;
        for _ in 0..200 {
            let cand = [
                margin + motion_rng.gen::<f64>() * (arena[0] - 2.0 * margin),
                margin + motion_rng.gen::<f64>() * (arena[1] - 2.0 * margin),
            ];
            let sep = groups
                .iter()
                .map(|g| dist(g.anchor, cand))
                .fold(f64::INFINITY, f64::min);
            if sep > best_sep {
                best = cand;
                best_sep = sep;
            }
            if sep >= m.min_anchor_separation.max(m.event_separation) {
                break;
            }
        }
        let heading = motion_rng.gen::<f64>() * TAU - PI;
        let offsets = formation_offsets(members, m.formation_radius, &mut motion_rng);
        groups.push(GroupState {
            id: next_group_id,
            members: members.clone(),
            anchor: best,
            heading,
            offsets,
            created_at: FrameId(1),
        });
        next_group_id += 1;
    }

    // Events sorted by frame, stable in list order within a frame.
    let mut event_order: Vec<usize> = (0..config.events.len()).collect();
    event_order.sort_by_key(|&i| config.events[i].frame);

    let mut states: BTreeMap<FrameId, BTreeMap<PersonId, PersonState>> = BTreeMap::new();
    let mut gt_partitions: BTreeMap<FrameId, Vec<BTreeSet<PersonId>>> = BTreeMap::new();
    let mut prev_states: BTreeMap<PersonId, PersonState> = BTreeMap::new();
    let mut event_cursor = 0usize;

    for frame in config.frame_ids() {
        // Membership changes first, so this frame already shows the new groups.
        while event_cursor < event_order.len()
            && config.events[event_order[event_cursor]].frame == frame
        {
            let ev = &config.events[event_order[event_cursor]];
            event_cursor += 1;
            apply_event(ev, &mut groups, &mut next_group_id, config, frame, &mut motion_rng);
        }

        // Anchor random walk with wall reflection.
        for g in groups.iter_mut() {
            let turn: f64 = motion_rng.sample::<f64, _>(StandardNormal) * m.turn_sigma;
            g.heading = wrap_angle(g.heading + turn);
            let mut next = [
                g.anchor[0] + step_len * g.heading.cos(),
                g.anchor[1] + step_len * g.heading.sin(),
            ];
            if next[0] < margin || next[0] > arena[0] - margin {
                g.heading = wrap_angle(PI - g.heading);
                next[0] = next[0].clamp(margin, arena[0] - margin);
            }
            if next[1] < margin || next[1] > arena[1] - margin {
                g.heading = wrap_angle(-g.heading);
                next[1] = next[1].clamp(margin, arena[1] - margin);
            }
            g.anchor = next;
        }

        // Anchor separation keeps distinct groups apart, so spatial proximity
        // stays informative about co-membership. The projection is a hard
        // constraint: a soft capped push lets converging groups interleave for
        // several frames, which poisons the ground-truth labels.
        if m.min_anchor_separation > 0.0 {
            let touched = separate_anchors(&mut groups, m.min_anchor_separation, arena, margin);
            // Turn colliding pairs outward so the walk stops driving them
            // back together on the very next frame.
            for (i, j) in touched {
                let away = [
                    groups[i].anchor[0] - groups[j].anchor[0],
                    groups[i].anchor[1] - groups[j].anchor[1],
                ];
                if away[0].hypot(away[1]) > 1e-9 {
                    groups[i].heading = wrap_angle(away[1].atan2(away[0]));
                    groups[j].heading = wrap_angle((-away[1]).atan2(-away[0]));
                }
            }
        }

        // Member states. Iterate groups in creation order and members in id
        // order; every present member consumes exactly two jitter draws.
        let mut frame_states: BTreeMap<PersonId, PersonState> = BTreeMap::new();
        let mut partition: Vec<(PersonId, BTreeSet<PersonId>)> = Vec::new();
        for g in groups.iter() {
            let mut present: BTreeSet<PersonId> = BTreeSet::new();
            for &p in &g.members {
                if !config.is_present(p, frame) {
                    continue;
                }
                present.insert(p);
                let jx: f64 = motion_rng.sample(StandardNormal);
                let jy: f64 = motion_rng.sample(StandardNormal);
                let off = g.offsets[&p];
                let target = [g.anchor[0] + off[0], g.anchor[1] + off[1]];
                let prev = prev_states.get(&p).copied();
                let rebase = g.created_at == frame || prev.is_none();
                let mut pos = match prev {
                    Some(ps) if !rebase => [
                        ps.position[0] + m.spring * (target[0] - ps.position[0]),
                        ps.position[1] + m.spring * (target[1] - ps.position[1]),
                    ],
                    _ => target,
                };
                pos[0] += config.position_noise_sigma * jx;
                pos[1] += config.position_noise_sigma * jy;
                let velocity = match prev {
                    Some(ps) => [pos[0] - ps.position[0], pos[1] - ps.position[1]],
                    None => [0.0, 0.0],
                };
                let speed = velocity[0].hypot(velocity[1]);
                let heading = if speed > 1e-9 {
                    velocity[1].atan2(velocity[0])
                } else {
                    let to_anchor = [g.anchor[0] - pos[0], g.anchor[1] - pos[1]];
                    if to_anchor[0].hypot(to_anchor[1]) > 1e-9 {
                        to_anchor[1].atan2(to_anchor[0])
                    } else {
                        prev.map(|ps| ps.heading).unwrap_or(g.heading)
                    }
                };
                frame_states.insert(
                    p,
                    PersonState {
                        person_id: p,
                        position: pos,
                        velocity,
                        heading: wrap_angle(heading),
                        occluded: false,
                    },
                );
            }
            if let Some(&min_member) = present.iter().next() {
                partition.push((min_member, present));
            }
        }

        // Occlusion flags come from their own stream: one draw per present
        // person per frame, so the rate never shifts other randomness.
        for st in frame_states.values_mut() {
            let roll: f64 = occl_rng.gen();
            st.occluded = roll < config.occlusion_rate;
        }

        partition.sort_by_key(|(min_member, _)| *min_member);
        prev_states = frame_states.clone();
        states.insert(frame, frame_states);
        gt_partitions.insert(frame, partition.into_iter().map(|(_, g)| g).collect());
    }

    let scenario = Scenario {
        states,
        gt_partitions,
        seed,
    };
    debug_assert!(scenario.check_consistency().is_ok());
    Ok(scenario)
}

/// Replace the event's source groups with its result groups, placing the new
/// anchors so the change is visible immediately.
fn apply_event(
    ev: &super::GroupEvent,
    groups: &mut Vec<GroupState>,
    next_group_id: &mut u64,
    config: &SimConfig,
    frame: FrameId,
    rng: &mut ChaCha8Rng,
) {
    let m = &config.motion;
    let margin = (m.formation_radius + 0.5)
        .min(config.arena[0] / 4.0)
        .min(config.arena[1] / 4.0);

    // Centroid of the source anchors, weighted by member count, as the
    // reference point for placing results.
    let mut center = [0.0, 0.0];
    let mut weight = 0.0;
    let mut source_heading = 0.0;
    let mut largest = 0usize;
    for sg in &ev.source_groups {
        if let Some(g) = groups.iter().find(|g| &g.members == sg) {
            let w = g.members.len() as f64;
            center[0] += g.anchor[0] * w;
            center[1] += g.anchor[1] * w;
            weight += w;
            if g.members.len() > largest {
                largest = g.members.len();
                source_heading = g.heading;
            }
        }
    }
    if weight > 0.0 {
        center[0] /= weight;
        center[1] /= weight;
    } else {
        center = [config.arena[0] / 2.0, config.arena[1] / 2.0];
    }

    groups.retain(|g| !ev.source_groups.contains(&g.members));
    let bystanders: Vec<[f64; 2]> = groups.iter().map(|g| g.anchor).collect();

    // Direction along which split/transfer results spread out. The draw
    // happens unconditionally so the stream shape is the same for every kind.
    let dir_angle: f64 = rng.gen::<f64>() * TAU;
    let k = ev.result_groups.len();
    let spots: Vec<[f64; 2]> = if ev.kind == EventKind::Merge || k == 1 {
        let pos = clamp_to_arena(center, config.arena, margin);
        let pos =
            avoid_bystanders(pos, m.min_anchor_separation, &bystanders, config.arena, margin);
        vec![pos; k]
    } else {
        spread_spots(
            dir_angle,
            center,
            k,
            m.event_separation,
            m.min_anchor_separation,
            &bystanders,
            config.arena,
            margin,
        )
    };

    for (j, members) in ev.result_groups.iter().enumerate() {
        let anchor = spots[j];
        let heading = if ev.kind == EventKind::Merge {
            source_heading
        } else {
            // Departing groups face away from the event center.
            let away = [anchor[0] - center[0], anchor[1] - center[1]];
            if away[0].hypot(away[1]) > 1e-9 {
                away[1].atan2(away[0])
            } else {
                source_heading
            }
        };
        let offsets = formation_offsets(members, m.formation_radius, rng);
        groups.push(GroupState {
            id: *next_group_id,
            members: members.clone(),
            anchor,
            heading,
            offsets,
            created_at: frame,
        });
        *next_group_id += 1;
    }
    groups.sort_by_key(|g| g.id);
}

/// Result anchors for a split or transfer: evenly spaced `event_sep` apart on
/// a line through `center`. Probes rotations of the random base angle and
/// keeps the first that leaves every result at least `clear` from every
/// bystander with the spacing intact despite arena clamping; when no rotation
/// manages that, keeps the least bad. Probes are derived arithmetically from
/// the one random draw, so the stream is identical either way.
#[allow(clippy::too_many_arguments)]
fn spread_spots(
    base_angle: f64,
    center: [f64; 2],
    k: usize,
    event_sep: f64,
    clear: f64,
    bystanders: &[[f64; 2]],
    arena: [f64; 2],
    margin: f64,
) -> Vec<[f64; 2]> {
    const PROBES: usize = 48;
    let mut best: Vec<[f64; 2]> = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    for p in 0..PROBES {
        let angle = base_angle + TAU * p as f64 / PROBES as f64;
        let dir = [angle.cos(), angle.sin()];
        let spots: Vec<[f64; 2]> = (0..k)
            .map(|j| {
                let t = j as f64 - (k - 1) as f64 / 2.0;
                clamp_to_arena(
                    [
                        center[0] + dir[0] * event_sep * t,
                        center[1] + dir[1] * event_sep * t,
                    ],
                    arena,
                    margin,
                )
            })
            .collect();
        let mut mutual = f64::INFINITY;
        for x in 0..k {
            for y in (x + 1)..k {
                mutual = mutual.min(dist(spots[x], spots[y]));
            }
        }
        let clearance = spots
            .iter()
            .flat_map(|s| bystanders.iter().map(move |b| dist(*s, *b)))
            .fold(f64::INFINITY, f64::min);
        let score = (mutual - event_sep + 1e-9)
            .min(clearance - clear + 1e-9)
            .min(0.0);
        if score > best_score {
            best_score = score;
            best = spots;
        }
        if best_score >= 0.0 {
            break;
        }
    }
    best
}

/// Keep a merge anchor from landing on a group not involved in the event. The
/// sources' centroid is the natural meeting point, but it can coincide with a
/// bystander, which would flip that bystander's labels from "apart" to
/// "together" with nothing in the geometry to show for it. Retreats from the
/// nearest offender, sidestepping along walls when the straight retreat is
/// blocked; a cramped arena may end best-effort close.
fn avoid_bystanders(
    mut pos: [f64; 2],
    clear: f64,
    bystanders: &[[f64; 2]],
    arena: [f64; 2],
    margin: f64,
) -> [f64; 2] {
    if clear <= 0.0 {
        return pos;
    }
    for _ in 0..MAX_SEPARATION_SWEEPS {
        let nearest = bystanders
            .iter()
            .map(|b| (*b, dist(pos, *b)))
            .filter(|(_, d)| *d < clear)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((offender, d)) = nearest else {
            return pos;
        };
        let dir = if d > 1e-9 {
            [(pos[0] - offender[0]) / d, (pos[1] - offender[1]) / d]
        } else {
            [1.0, 0.0]
        };
        let retreat = clamp_to_arena(
            [
                offender[0] + dir[0] * (clear + 1e-9),
                offender[1] + dir[1] * (clear + 1e-9),
            ],
            arena,
            margin,
        );
        if dist(retreat, offender) + 1e-12 >= clear {
            pos = retreat;
            continue;
        }
        let ortho = [-dir[1], dir[0]];
        let mut best = retreat;
        let mut best_clearance = bystanders
            .iter()
            .map(|b| dist(retreat, *b))
            .fold(f64::INFINITY, f64::min);
        for sign in [1.0, -1.0] {
            let cand = clamp_to_arena(
                [
                    pos[0] + ortho[0] * clear * sign,
                    pos[1] + ortho[1] * clear * sign,
                ],
                arena,
                margin,
            );
            let c = bystanders
                .iter()
                .map(|b| dist(cand, *b))
                .fold(f64::INFINITY, f64::min);
            if c > best_clearance {
                best_clearance = c;
                best = cand;
            }
        }
        pos = best;
    }
    pos
}
