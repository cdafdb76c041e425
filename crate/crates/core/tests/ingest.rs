use std::collections::BTreeSet;
use std::path::PathBuf;

use passnet_core::ingest::markup::{self, MarkupDialect};
use passnet_core::ingest::{
    attribute_carriers, boxscore_to_text, build_dataset, merge_streams, openness, parse_boxscore, parse_playbyplay,
    parse_tracking, playbyplay_to_text, segment_possessions, tracking_to_text, CovariateOptions, PlayKind,
    PlayerSnapshot, PossessionOutcome, TeamSide, TrackingFrame, OPENNESS_CAP,
};
use passnet_core::model::{GameId, PlayerId};
use passnet_core::spatial::CourtLocation;
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn three_well_formed_frames() {
    let p = parse_tracking(&fixture("three_frames.tracking.csv")).unwrap();
    assert_eq!(p.items.len(), 3);
    assert!(p.diagnostics.is_clean());
    let f = &p.items[1];
    assert_eq!(f.game, GameId(4));
    assert_eq!(f.timestamp, 10.04);
    assert_eq!(f.ball, Some(CourtLocation::new(12.75, 30.1)));
    assert_eq!(f.ball_height, None);
    assert_eq!(p.items[0].ball_height, Some(8.25));
    assert_eq!(f.players[0].player, PlayerId(7));
    assert_eq!(f.players[0].location, Some(CourtLocation::new(12.2, 30.5)));
    assert_eq!(f.players[1].side, TeamSide::Away);
    assert_eq!(f.players[1].location, None);
}

#[test]
fn one_corrupt_row_among_five() {
    let p = parse_tracking(&fixture("one_corrupt.tracking.csv")).unwrap();
    assert_eq!(p.items.len(), 4);
    assert_eq!(p.diagnostics.corrupt_rows, 1);
}

#[test]
fn playbyplay_fixtures() {
    let p = parse_playbyplay(&fixture("one_pass.playbyplay.csv")).unwrap();
    assert_eq!(p.items.len(), 1);
    assert_eq!(p.items[0].kind, PlayKind::Pass);
    let u = parse_playbyplay(&fixture("unknown_label.playbyplay.csv")).unwrap();
    assert_eq!(u.items[1].kind, PlayKind::Other);
    assert_eq!(u.diagnostics.unknown_labels, 1);
    assert!(!u.diagnostics.is_clean());
}

#[test]
fn fixtures_round_trip_byte_for_byte() {
    for name in ["game1.tracking.csv", "three_frames.tracking.csv"] {
        let text = fixture(name);
        assert_eq!(tracking_to_text(&parse_tracking(&text).unwrap().items), text, "{name}");
    }
    let text = fixture("one_pass.playbyplay.csv");
    assert_eq!(playbyplay_to_text(&parse_playbyplay(&text).unwrap().items), text);
    // Unknown labels are written back as `other`; from then on the text is stable.
    let once = playbyplay_to_text(&parse_playbyplay(&fixture("game1.playbyplay.csv")).unwrap().items);
    assert_eq!(once.matches(",other,").count(), 2);
    assert_eq!(playbyplay_to_text(&parse_playbyplay(&once).unwrap().items), once);
    let text = fixture("game1.boxscore.csv");
    assert_eq!(boxscore_to_text(&parse_boxscore(&text).unwrap().items), text);

    let d = MarkupDialect::default();
    let text = fixture("game1.tracking.xml");
    assert_eq!(markup::tracking_to_markup(&markup::parse_tracking(&text, &d).unwrap().items), text);
    let text = fixture("game1.boxscore.xml");
    assert_eq!(markup::boxscore_to_markup(&markup::parse_boxscore(&text, &d).unwrap().items), text);
}

#[test]
fn markup_and_line_formats_agree() {
    let d = MarkupDialect::default();
    assert_eq!(
        markup::parse_tracking(&fixture("game1.tracking.xml"), &d).unwrap(),
        parse_tracking(&fixture("game1.tracking.csv")).unwrap()
    );
    assert_eq!(
        markup::parse_playbyplay(&fixture("game1.playbyplay.xml"), &d).unwrap(),
        parse_playbyplay(&fixture("game1.playbyplay.csv")).unwrap()
    );
    assert_eq!(
        markup::parse_boxscore(&fixture("game1.boxscore.xml"), &d).unwrap(),
        parse_boxscore(&fixture("game1.boxscore.csv")).unwrap()
    );
}

struct Game {
    frames: Vec<TrackingFrame>,
    annotations: Vec<passnet_core::ingest::PlayAnnotation>,
    boxscore: Vec<passnet_core::ingest::BoxScoreRow>,
}

fn game1() -> Game {
    Game {
        frames: parse_tracking(&fixture("game1.tracking.csv")).unwrap().items,
        annotations: parse_playbyplay(&fixture("game1.playbyplay.csv")).unwrap().items,
        boxscore: parse_boxscore(&fixture("game1.boxscore.csv")).unwrap().items,
    }
}

#[test]
fn merge_binds_and_drops() {
    let g = game1();
    let (record, diag) = merge_streams(&g.frames, &g.annotations, &g.boxscore).unwrap();
    // The 3.5 s annotation is past the last frame.
    assert_eq!(record.annotations.len(), g.annotations.len() - 1);
    assert_eq!(diag.messages.len(), 1);
    // 0.33 s binds to the 0.32 s frame.
    let pass = record.annotations.iter().find(|b| b.annotation.timestamp == 0.33).unwrap();
    assert_eq!(pass.frame, 8);
    assert_eq!(record.positions.len(), 10);
}

#[test]
fn game_fixture_possessions() {
    let g = game1();
    let (record, _) = merge_streams(&g.frames, &g.annotations, &g.boxscore).unwrap();
    let ps = segment_possessions(&record);
    assert_eq!(ps.len(), 4);
    let covered: Vec<usize> = ps.iter().flat_map(|p| p.frames()).collect();
    assert_eq!(covered, (0..record.frames.len()).collect::<Vec<_>>());
    assert_eq!(ps[0].outcome, Some(PossessionOutcome::Made));
    assert_eq!(ps[0].offense, Some(TeamSide::Home));
    assert!(ps[1].excluded);
    assert_eq!(ps[2].outcome, Some(PossessionOutcome::Missed));
    assert_eq!(ps[2].offense, Some(TeamSide::Away));
    assert!(ps[3].incomplete && !ps[3].excluded);
}

#[test]
fn game_fixture_dataset() {
    let g = game1();
    let out = build_dataset(&g.frames, &g.annotations, &g.boxscore, &CovariateOptions::default()).unwrap();
    let data = &out.dataset;
    assert_eq!(out.registry.len(), 10);
    // 4 + 0 + 4 + 1 intervals; the one at frame 20 has a missing coordinate.
    assert_eq!(data.n_intervals(), 9);
    assert_eq!(data.covariates.len(), 36);
    assert!(data.covariates.iter().all(|c| c.interval_index < 25 || c.interval_index >= 40));
    assert!(!data.covariates.iter().any(|c| c.interval_index == 20));
    let raw = |p: PlayerId| out.registry.raw(p).unwrap().0;
    let events: Vec<(u32, u32, u32)> = data.events.iter().map(|e| (e.interval_index, raw(e.sender), raw(e.receiver))).collect();
    assert_eq!(events, vec![(5, 101, 102), (45, 201, 202)]);
    // Dribble at frame 2 by the carrier: latched from the next interval on.
    let w2: Vec<f64> = data
        .covariates
        .iter()
        .filter(|c| raw(c.sender) == 101)
        .step_by(4)
        .map(|c| c.w[1])
        .collect();
    assert_eq!(w2, vec![0.0, 1.0, 1.0]);
    // Fitted fields are proper densities.
    for (_, f) in out.fields.players() {
        assert!((f.xi.grid_integral() - 1.0).abs() < 1e-9);
        for field in f.xi_tilde.values() {
            assert!((field.grid_integral() - 1.0).abs() < 1e-9);
        }
    }
    assert_eq!(out.passes.len(), 2);
    assert_eq!(out.diagnostics.unknown_labels, 0);
}

#[test]
fn fixture_ranks_are_a_bijection() {
    let g = game1();
    let out = build_dataset(&g.frames, &g.annotations, &g.boxscore, &CovariateOptions::default()).unwrap();
    let mut by_interval = std::collections::BTreeMap::new();
    for c in &out.dataset.covariates {
        by_interval.entry(c.interval_index).or_insert_with(Vec::new).push(c.w[3] as u32);
    }
    for ranks in by_interval.values() {
        let set: BTreeSet<u32> = ranks.iter().copied().collect();
        assert_eq!(set, BTreeSet::from([1, 2, 3, 4]));
        assert_eq!(ranks.len(), 4);
    }
}

#[test]
fn corridor_without_defenders_scores_the_cap() {
    let (a, b) = (CourtLocation::new(5.0, 5.0), CourtLocation::new(25.0, 25.0));
    // Defenders 2.1 ft or more from the lane, i.e. outside a 4 ft corridor.
    let off = 2.1 / 2f64.sqrt();
    let defenders = [CourtLocation::new(15.0 - off, 15.0 + off), CourtLocation::new(10.0 + off, 10.0 - off)];
    assert!((openness(a, b, &defenders) - 2.303).abs() < 1e-3);
    assert_eq!(openness(a, b, &defenders), OPENNESS_CAP);
}

fn arb_frame(game: u32, t: f64) -> impl Strategy<Value = TrackingFrame> {
    let loc = proptest::option::weighted(0.9, (0.0..47.0f64, 0.0..50.0f64));
    let player = (any::<bool>(), loc.clone());
    (proptest::collection::vec(player, 0..=10), loc, proptest::option::of(0.0..12.0f64)).prop_map(
        move |(players, ball, z)| TrackingFrame {
            game: GameId(game),
            timestamp: t,
            ball: ball.map(|(x, y)| CourtLocation::new(x, y)),
            ball_height: z,
            players: players
                .into_iter()
                .enumerate()
                .map(|(i, (home, l))| PlayerSnapshot {
                    player: PlayerId(100 + i as u32),
                    side: if home { TeamSide::Home } else { TeamSide::Away },
                    location: l.map(|(x, y)| CourtLocation::new(x, y)),
                })
                .collect(),
        },
    )
}

fn arb_frames() -> impl Strategy<Value = Vec<TrackingFrame>> {
    (1usize..12).prop_flat_map(|n| (0..n).map(|k| arb_frame(1, k as f64 * 0.04)).collect::<Vec<_>>())
}

/// Ten players standing still, the ball held in runs by random players,
/// random annotations.
fn arb_game() -> impl Strategy<Value = (Vec<TrackingFrame>, Vec<(usize, PlayKind)>)> {
    let kinds = prop::sample::select(PlayKind::ALL.to_vec());
    proptest::collection::vec((0usize..10, 1usize..16), 1..12).prop_flat_map(move |runs| {
        let holders: Vec<usize> = runs.iter().flat_map(|&(h, len)| std::iter::repeat_n(h, len)).collect();
        let n = holders.len();
        proptest::collection::vec((0..n, kinds.clone()), 0..8).prop_map(move |anns| {
            let spot = |i: usize| CourtLocation::new(4.0 + 4.0 * i as f64, 5.0 + 4.0 * ((i * 7) % 10) as f64);
            let frames = holders
                .iter()
                .enumerate()
                .map(|(k, &h)| TrackingFrame {
                    game: GameId(1),
                    timestamp: k as f64 * 0.04,
                    ball: Some(CourtLocation::new(spot(h).x + 0.5, spot(h).y)),
                    ball_height: None,
                    players: (0..10)
                        .map(|i| PlayerSnapshot {
                            player: PlayerId(i as u32),
                            side: if i < 5 { TeamSide::Home } else { TeamSide::Away },
                            location: Some(spot(i)),
                        })
                        .collect(),
                })
                .collect();
            (frames, anns)
        })
    })
}

fn annotate(frames: &[TrackingFrame], anns: &[(usize, PlayKind)]) -> Vec<passnet_core::ingest::PlayAnnotation> {
    anns.iter()
        .map(|&(k, kind)| passnet_core::ingest::PlayAnnotation {
            game: GameId(1),
            timestamp: frames[k].timestamp,
            kind,
            player: Some(PlayerId((k % 10) as u32)),
        })
        .collect()
}

proptest! {
    #[test]
    fn parse_serialize_is_idempotent(frames in arb_frames()) {
        let text = tracking_to_text(&frames);
        let once = parse_tracking(&text).unwrap();
        prop_assert!(once.diagnostics.is_clean());
        let twice = parse_tracking(&tracking_to_text(&once.items)).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(&once.items, &frames);
        let xml = markup::tracking_to_markup(&frames);
        prop_assert_eq!(markup::parse_tracking(&xml, &MarkupDialect::default()).unwrap(), once);
    }

    #[test]
    fn possessions_partition_frames((frames, anns) in arb_game()) {
        let (record, _) = merge_streams(&frames, &annotate(&frames, &anns), &[]).unwrap();
        let ps = segment_possessions(&record);
        let covered: Vec<usize> = ps.iter().flat_map(|p| p.frames()).collect();
        prop_assert_eq!(covered, (0..frames.len()).collect::<Vec<_>>());
        for w in ps.windows(2) {
            prop_assert!(w[0].end_time < w[1].start_time);
        }
        for p in &ps {
            prop_assert!(!(p.excluded && p.incomplete));
        }
    }

    #[test]
    fn extracted_covariates_are_well_formed((frames, anns) in arb_game()) {
        let options = CovariateOptions { fields: None, ..Default::default() };
        let out = build_dataset(&frames, &annotate(&frames, &anns), &[], &options).unwrap();
        let mut by_interval = std::collections::BTreeMap::new();
        for c in &out.dataset.covariates {
            prop_assert!(c.w[2].is_finite() && c.w[4].is_finite());
            prop_assert!(c.w[4] >= 0.0 && c.w[4] <= OPENNESS_CAP);
            prop_assert!(c.w[0] == 1.0 && (c.w[1] == 0.0 || c.w[1] == 1.0));
            by_interval.entry(c.interval_index).or_insert_with(BTreeSet::new).insert(c.w[3] as u32);
        }
        for ranks in by_interval.values() {
            prop_assert_eq!(ranks, &BTreeSet::from([1, 2, 3, 4]));
        }
        // Excluded possessions never reach the data.
        for g in &out.games {
            for p in g.possessions.iter().filter(|p| p.excluded) {
                prop_assert!(!out.dataset.covariates.iter().any(|c| p.frames().contains(&(c.interval_index as usize))));
            }
        }
    }

    #[test]
    fn carriers_are_near_the_ball_when_they_change((frames, _) in arb_game()) {
        let carriers = attribute_carriers(&frames);
        prop_assert_eq!(carriers.len(), frames.len());
        for (k, c) in carriers.iter().enumerate() {
            if let Some(p) = c {
                prop_assert!(frames[k].player(*p).is_some());
            }
        }
    }
}

#[test]
fn held_ball_yields_cells() {
    // The generator's geometry with one long run per holder produces data.
    let spot = |i: usize| CourtLocation::new(4.0 + 4.0 * i as f64, 5.0 + 4.0 * ((i * 7) % 10) as f64);
    let frames: Vec<TrackingFrame> = (0..40)
        .map(|k| TrackingFrame {
            game: GameId(1),
            timestamp: k as f64 * 0.04,
            ball: Some(CourtLocation::new(spot(k / 20).x + 0.5, spot(k / 20).y)),
            ball_height: None,
            players: (0..10)
                .map(|i| PlayerSnapshot {
                    player: PlayerId(i as u32),
                    side: if i < 5 { TeamSide::Home } else { TeamSide::Away },
                    location: Some(spot(i)),
                })
                .collect(),
        })
        .collect();
    let options = CovariateOptions { fields: None, ..Default::default() };
    let out = build_dataset(&frames, &[], &[], &options).unwrap();
    assert_eq!(out.dataset.n_intervals(), 8);
}
