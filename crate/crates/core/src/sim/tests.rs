use super::*;
use crate::sim::tracks::ground_truth_links;
use proptest::prelude::*;

fn group(ids: &[u32]) -> BTreeSet<PersonId> {
    ids.iter().copied().map(PersonId).collect()
}

/// Five people in a trio and a pair, walking for forty frames.
fn two_group_config() -> SimConfig {
    SimConfig {
        num_people: 5,
        num_frames: 40,
        fps: 2.0,
        arena: [20.0, 20.0],
        initial_groups: vec![group(&[1, 2, 3]), group(&[4, 5])],
        events: vec![],
        position_noise_sigma: 0.0,
        occlusion_rate: 0.0,
        entry_exit: None,
        motion: MotionParams::default(),
    }
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let config = two_group_config();
    let a = simulate(&config, 7).unwrap();
    let b = simulate(&config, 7).unwrap();
    assert_eq!(a, b);

    let c = simulate(&config, 8).unwrap();
    let f = FrameId(10);
    let p = PersonId(1);
    assert_ne!(a.state(f, p).unwrap().position, c.state(f, p).unwrap().position);
}

#[test]
fn partitions_are_constant_without_events() {
    let config = two_group_config();
    let scenario = simulate(&config, 3).unwrap();
    scenario.check_consistency().unwrap();
    for frame in scenario.frames() {
        assert_eq!(
            scenario.gt_partitions[&frame],
            vec![group(&[1, 2, 3]), group(&[4, 5])],
        );
    }
}

#[test]
fn displacement_is_bounded_between_events() {
    let mut config = two_group_config();
    config.motion.spring = 1.0; // members track their slots exactly
    let scenario = simulate(&config, 11).unwrap();
    let step = config.motion.anchor_speed_mps.min(MAX_WALK_SPEED_MPS) / config.fps;
    let frames: Vec<_> = scenario.frames().collect();
    for pair in frames.windows(2) {
        for p in scenario.persons_at(pair[1]) {
            let a = scenario.state(pair[0], p).unwrap().position;
            let b = scenario.state(pair[1], p).unwrap().position;
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            // One walk step plus at most one repulsion push.
            assert!(d <= 2.0 * step + 1e-9, "person {p} moved {d} m in one frame");
        }
    }
}

#[test]
fn pair_keeps_formation_distance_exactly_without_noise() {
    let config = two_group_config();
    let scenario = simulate(&config, 5).unwrap();
    let expected = 2.0 * config.motion.formation_radius;
    for frame in scenario.frames() {
        let a = scenario.state(frame, PersonId(4)).unwrap().position;
        let b = scenario.state(frame, PersonId(5)).unwrap().position;
        let d = (a[0] - b[0]).hypot(a[1] - b[1]);
        assert!((d - expected).abs() < 1e-9, "frame {frame}: distance {d}");
    }
}

#[test]
fn velocity_matches_position_difference() {
    let mut config = two_group_config();
    config.position_noise_sigma = 0.05;
    let scenario = simulate(&config, 9).unwrap();
    let frames: Vec<_> = scenario.frames().collect();
    for pair in frames.windows(2) {
        for p in scenario.persons_at(pair[1]) {
            let prev = scenario.state(pair[0], p).unwrap().position;
            let cur = scenario.state(pair[1], p).unwrap();
            assert!((cur.velocity[0] - (cur.position[0] - prev[0])).abs() < 1e-12);
            assert!((cur.velocity[1] - (cur.position[1] - prev[1])).abs() < 1e-12);
        }
    }
}

#[test]
fn split_event_changes_partition_at_its_frame() {
    let mut config = two_group_config();
    config.events = vec![GroupEvent {
        frame: FrameId(20),
        kind: EventKind::Split,
        source_groups: vec![group(&[1, 2, 3])],
        result_groups: vec![group(&[1, 2]), group(&[3])],
    }];
    let scenario = simulate(&config, 13).unwrap();
    assert_eq!(
        scenario.gt_partitions[&FrameId(19)],
        vec![group(&[1, 2, 3]), group(&[4, 5])],
    );
    assert_eq!(
        scenario.gt_partitions[&FrameId(20)],
        vec![group(&[1, 2]), group(&[3]), group(&[4, 5])],
    );
    // The departing singleton is separated spatially right away.
    let solo = scenario.state(FrameId(20), PersonId(3)).unwrap().position;
    let kept = scenario.state(FrameId(20), PersonId(1)).unwrap().position;
    let d = (solo[0] - kept[0]).hypot(solo[1] - kept[1]);
    assert!(d > 2.0, "split members only {d} m apart");
}

#[test]
fn merge_event_joins_groups() {
    let mut config = two_group_config();
    config.events = vec![GroupEvent {
        frame: FrameId(25),
        kind: EventKind::Merge,
        source_groups: vec![group(&[1, 2, 3]), group(&[4, 5])],
        result_groups: vec![group(&[1, 2, 3, 4, 5])],
    }];
    let scenario = simulate(&config, 21).unwrap();
    assert_eq!(scenario.gt_partitions[&FrameId(24)].len(), 2);
    assert_eq!(
        scenario.gt_partitions[&FrameId(25)],
        vec![group(&[1, 2, 3, 4, 5])],
    );
    // All five now share one formation circle.
    for p in [2, 3, 4, 5] {
        let a = scenario.state(FrameId(25), PersonId(1)).unwrap().position;
        let b = scenario.state(FrameId(25), PersonId(p)).unwrap().position;
        let d = (a[0] - b[0]).hypot(a[1] - b[1]);
        assert!(d <= 2.0 * config.motion.formation_radius + 1e-9);
    }
}

#[test]
fn member_transfer_moves_people_between_groups() {
    let mut config = two_group_config();
    config.events = vec![GroupEvent {
        frame: FrameId(15),
        kind: EventKind::MemberTransfer,
        source_groups: vec![group(&[1, 2, 3]), group(&[4, 5])],
        result_groups: vec![group(&[1, 2]), group(&[3, 4, 5])],
    }];
    let scenario = simulate(&config, 17).unwrap();
    assert_eq!(
        scenario.gt_partitions[&FrameId(15)],
        vec![group(&[1, 2]), group(&[3, 4, 5])],
    );
    scenario.check_consistency().unwrap();
}

#[test]
fn event_at_first_frame_applies_before_any_state() {
    let mut config = two_group_config();
    config.events = vec![GroupEvent {
        frame: FrameId(1),
        kind: EventKind::Split,
        source_groups: vec![group(&[1, 2, 3])],
        result_groups: vec![group(&[1]), group(&[2, 3])],
    }];
    let scenario = simulate(&config, 23).unwrap();
    assert_eq!(scenario.gt_partitions[&FrameId(1)].len(), 3);
}

#[test]
fn chained_events_replay_against_updated_membership() {
    let mut config = two_group_config();
    config.events = vec![
        GroupEvent {
            frame: FrameId(10),
            kind: EventKind::Split,
            source_groups: vec![group(&[1, 2, 3])],
            result_groups: vec![group(&[1, 2]), group(&[3])],
        },
        GroupEvent {
            frame: FrameId(20),
            kind: EventKind::Merge,
            source_groups: vec![group(&[3]), group(&[4, 5])],
            result_groups: vec![group(&[3, 4, 5])],
        },
    ];
    let scenario = simulate(&config, 29).unwrap();
    assert_eq!(
        scenario.gt_partitions[&FrameId(30)],
        vec![group(&[1, 2]), group(&[3, 4, 5])],
    );
}

#[test]
fn entry_exit_limits_presence() {
    let mut config = two_group_config();
    config.entry_exit = Some(vec![PresenceWindow {
        person: PersonId(5),
        first_frame: FrameId(10),
        last_frame: FrameId(30),
    }]);
    let scenario = simulate(&config, 31).unwrap();
    scenario.check_consistency().unwrap();
    assert!(scenario.state(FrameId(9), PersonId(5)).is_none());
    assert!(scenario.state(FrameId(10), PersonId(5)).is_some());
    assert!(scenario.state(FrameId(31), PersonId(5)).is_none());
    // Person 4's group shrinks to a singleton while 5 is away.
    assert!(scenario.gt_partitions[&FrameId(5)].contains(&group(&[4])));
    assert!(scenario.gt_partitions[&FrameId(20)].contains(&group(&[4, 5])));
}

#[test]
fn occlusion_rate_extremes() {
    let mut config = two_group_config();
    let clear = simulate(&config, 1).unwrap();
    assert!(clear.states.values().flat_map(|m| m.values()).all(|s| !s.occluded));

    config.occlusion_rate = 1.0;
    let blocked = simulate(&config, 1).unwrap();
    assert!(blocked.states.values().flat_map(|m| m.values()).all(|s| s.occluded));
    // Occlusion uses its own stream: positions are unaffected by the rate.
    let f = FrameId(17);
    for p in clear.persons_at(f) {
        assert_eq!(
            clear.state(f, p).unwrap().position,
            blocked.state(f, p).unwrap().position,
        );
    }
}

#[test]
fn validation_rejects_bad_configs() {
    let mut c = two_group_config();
    c.initial_groups = vec![group(&[1, 2, 3]), group(&[3, 4, 5])];
    assert!(c.validate().is_err());

    let mut c = two_group_config();
    c.initial_groups = vec![group(&[1, 2, 3, 4, 5, 6])];
    assert!(c.validate().is_err());

    let mut c = two_group_config();
    c.initial_groups = vec![group(&[1, 2, 3])];
    assert!(matches!(c.validate(), Err(crate::Error::Config { field, .. }) if field == "initial_groups"));

    let mut c = two_group_config();
    c.occlusion_rate = 1.5;
    assert!(c.validate().is_err());

    let mut c = two_group_config();
    c.motion.spring = 0.0;
    assert!(c.validate().is_err());

    let mut c = two_group_config();
    c.events = vec![GroupEvent {
        frame: FrameId(10),
        kind: EventKind::Split,
        source_groups: vec![group(&[1, 2])], // not a group at frame 10
        result_groups: vec![group(&[1]), group(&[2])],
    }];
    assert!(c.validate().is_err());

    let mut c = two_group_config();
    c.events = vec![GroupEvent {
        frame: FrameId(90), // past the end
        kind: EventKind::Merge,
        source_groups: vec![group(&[1, 2, 3]), group(&[4, 5])],
        result_groups: vec![group(&[1, 2, 3, 4, 5])],
    }];
    assert!(c.validate().is_err());
}

#[test]
fn ground_truth_links_are_identity_with_full_confidence() {
    let mut config = two_group_config();
    config.entry_exit = Some(vec![PresenceWindow {
        person: PersonId(2),
        first_frame: FrameId(1),
        last_frame: FrameId(10),
    }]);
    let scenario = simulate(&config, 41).unwrap();
    let links = ground_truth_links(&scenario);
    links.check_consistency().unwrap();
    // 4 ever-present persons over 39 frame pairs, plus person 2 for 9 pairs.
    assert_eq!(links.links.len(), 4 * 39 + 9);
    assert!(links.links.iter().all(|l| l.a == l.b && l.p_t == 1.0));
}

#[test]
fn full_switch_rate_swaps_every_pair() {
    let mut config = two_group_config();
    config.num_people = 2;
    config.initial_groups = vec![group(&[1, 2])];
    let scenario = simulate(&config, 43).unwrap();
    let links = corrupt_tracks(&scenario, 1.0, 0.0, 43).unwrap();
    assert_eq!(links.links.len(), 2 * 39);
    assert!(links.links.iter().all(|l| l.a != l.b), "every link must be switched");
    links.check_consistency().unwrap();
}

#[test]
fn confidence_noise_matches_folded_normal_mean() {
    let mut config = two_group_config();
    config.num_people = 2;
    config.num_frames = 6000;
    config.initial_groups = vec![group(&[1, 2])];
    let scenario = simulate(&config, 47).unwrap();
    let sigma = 0.1;
    let links = corrupt_tracks(&scenario, 0.0, sigma, 47).unwrap();
    let mean: f64 = links.links.iter().map(|l| l.p_t).sum::<f64>() / links.links.len() as f64;
    // E[1 - sigma*|z|] = 1 - sigma*sqrt(2/pi); Monte Carlo, generous band.
    let expected = 1.0 - sigma * (2.0 / std::f64::consts::PI).sqrt();
    assert!(
        (mean - expected).abs() < 0.01,
        "mean p_t {mean} vs expected {expected}"
    );
    assert!(links.links.iter().all(|l| (0.0..=1.0).contains(&l.p_t)));
}

#[test]
fn corrupt_tracks_rejects_bad_rates() {
    let scenario = simulate(&two_group_config(), 1).unwrap();
    assert!(corrupt_tracks(&scenario, -0.1, 0.0, 1).is_err());
    assert!(corrupt_tracks(&scenario, 1.1, 0.0, 1).is_err());
    assert!(corrupt_tracks(&scenario, 0.0, -1.0, 1).is_err());
}

/// Build a valid config from free-form proptest inputs.
fn arbitrary_config(
    num_people: u32,
    num_frames: u32,
    sizes: &[u32],
    windows: &[(u32, u32)],
) -> SimConfig {
    let mut groups: Vec<BTreeSet<PersonId>> = Vec::new();
    let mut next = 1u32;
    let mut size_iter = sizes.iter().copied().cycle();
    while next <= num_people {
        let take = size_iter.next().unwrap_or(1).max(1).min(num_people - next + 1);
        groups.push((next..next + take).map(PersonId).collect());
        next += take;
    }
    let entry_exit = windows
        .iter()
        .zip(1..=num_people)
        .map(|(&(a, b), p)| {
            let first = a % num_frames + 1;
            let last = b % num_frames + 1;
            PresenceWindow {
                person: PersonId(p),
                first_frame: FrameId(first.min(last)),
                last_frame: FrameId(first.max(last)),
            }
        })
        .collect();
    SimConfig {
        num_people,
        num_frames,
        fps: 2.0,
        arena: [15.0, 15.0],
        initial_groups: groups,
        events: vec![],
        position_noise_sigma: 0.02,
        occlusion_rate: 0.2,
        entry_exit: Some(entry_exit),
        motion: MotionParams::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_simulate_output_is_consistent(
        num_people in 1..=6u32,
        num_frames in 1..=12u32,
        sizes in prop::collection::vec(1..=3u32, 1..=4),
        windows in prop::collection::vec((0..64u32, 0..64u32), 6),
        seed in any::<u64>(),
    ) {
        let config = arbitrary_config(num_people, num_frames, &sizes, &windows);
        prop_assert!(config.validate().is_ok());
        let scenario = simulate(&config, seed).unwrap();
        prop_assert!(scenario.check_consistency().is_ok());
        prop_assert_eq!(scenario.num_frames(), num_frames as usize);
        // Without events every ground-truth group is a subset of an initial group.
        for groups in scenario.gt_partitions.values() {
            for g in groups {
                prop_assert!(config.initial_groups.iter().any(|ig| g.is_subset(ig)));
            }
        }
        let again = simulate(&config, seed).unwrap();
        prop_assert_eq!(scenario, again);
    }

    #[test]
    fn prop_corrupt_tracks_keeps_links_consistent(
        rate in 0.0..=1.0f64,
        sigma in 0.0..=0.5f64,
        seed in any::<u64>(),
    ) {
        let scenario = simulate(&two_group_config(), seed).unwrap();
        let links = corrupt_tracks(&scenario, rate, sigma, seed).unwrap();
        prop_assert!(links.check_consistency().is_ok());
        // Switches permute targets: per frame, sources and targets coincide.
        let mut by_frame: BTreeMap<FrameId, (BTreeSet<PersonId>, BTreeSet<PersonId>)> = BTreeMap::new();
        for l in &links.links {
            let entry = by_frame.entry(l.frame).or_default();
            entry.0.insert(l.a);
            entry.1.insert(l.b);
        }
        for (sources, targets) in by_frame.values() {
            prop_assert_eq!(sources, targets);
        }
    }
}
