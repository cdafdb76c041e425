use std::collections::{BTreeMap, BTreeSet};

use super::possession::{attribute_carriers, segment_possessions, Possession};
use super::{merge_streams, BoxScoreRow, Diagnostics, GameRecord, PlayAnnotation, PlayKind, TrackingFrame, FRAME_RATE};
use crate::error::{Error, Result};
use crate::model::{CovariateRecord, Dataset, GameId, PassEvent, PlayerId, PositionClass};
use crate::spatial::{CourtLocation, FieldStore, LambdaChoice, LocatedPass, SpatialField};

/// Floor applied to distances before taking logs, in feet.
pub const MIN_DISTANCE: f64 = 0.1;
/// Upper bound of the openness score, `ln 10`.
pub const OPENNESS_CAP: f64 = std::f64::consts::LN_10;

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateOptions {
    /// Frames per observation interval (5 frames = 0.2 s).
    pub frames_per_interval: usize,
    /// Smoothing for the fitted player fields; `None` uses the uniform field
    /// for every player.
    pub fields: Option<LambdaChoice<f64>>,
}

impl Default for CovariateOptions {
    fn default() -> Self {
        CovariateOptions {
            frames_per_interval: 5,
            fields: Some(LambdaChoice::default()),
        }
    }
}

/// Openness of the passing lane from `sender` to `receiver`:
/// `min(ln(max(d, 0.1) / 0.1), ln 10)`, where `d` is the smallest distance in
/// feet from a defender to the segment between the two. Defenders 1 ft or
/// more from the lane all score the cap, as does an empty defender list.
pub fn openness(sender: CourtLocation, receiver: CourtLocation, defenders: &[CourtLocation]) -> f64 {
    let d = defenders
        .iter()
        .map(|p| segment_distance(*p, sender, receiver))
        .fold(f64::INFINITY, f64::min);
    (d.max(MIN_DISTANCE) / MIN_DISTANCE).ln().min(OPENNESS_CAP)
}

fn segment_distance(p: CourtLocation, a: CourtLocation, b: CourtLocation) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&CourtLocation::new(a.x + t * dx, a.y + t * dy))
}

/// Raw source ids mapped onto `0..n` in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlayerRegistry {
    raw: Vec<PlayerId>,
}

impl PlayerRegistry {
    pub fn new(ids: impl IntoIterator<Item = PlayerId>) -> Self {
        let set: BTreeSet<PlayerId> = ids.into_iter().collect();
        PlayerRegistry {
            raw: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Model index of a raw id.
    pub fn index(&self, raw: PlayerId) -> Option<PlayerId> {
        self.raw.binary_search(&raw).ok().map(|k| PlayerId(k as u32))
    }

    /// Raw id of a model index.
    pub fn raw(&self, index: PlayerId) -> Option<PlayerId> {
        self.raw.get(index.index()).copied()
    }

    pub fn raw_ids(&self) -> &[PlayerId] {
        &self.raw
    }
}

/// A pass resolved against the carrier sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ResolvedPass {
    frame: usize,
    reception: usize,
    sender: PlayerId,
    receiver: PlayerId,
}

/// Pass annotations of a possession whose passer held the ball, paired with
/// the next teammate to hold it. `carriers` covers the possession's frames.
fn resolve_passes(
    record: &GameRecord,
    possession: &Possession,
    carriers: &[Option<PlayerId>],
    diagnostics: &mut Diagnostics,
) -> Vec<ResolvedPass> {
    let start = possession.start_frame;
    let mut out = Vec::new();
    for b in &record.annotations {
        if b.annotation.kind != PlayKind::Pass || !possession.frames().contains(&b.frame) {
            continue;
        }
        let t = b.annotation.timestamp;
        let Some(sender) = b.annotation.player else {
            diagnostics.note(format!("pass at {t} s in game {} names no passer; dropped", record.game));
            continue;
        };
        let local = b.frame - start;
        if carriers[local] != Some(sender) {
            diagnostics.note(format!(
                "pass at {t} s in game {} by player {sender} who does not hold the ball; dropped",
                record.game
            ));
            continue;
        }
        let next = (local + 1..carriers.len()).find_map(|k| match carriers[k] {
            Some(p) if p != sender => Some((k, p)),
            _ => None,
        });
        let Some((k, receiver)) = next else {
            diagnostics.note(format!("pass at {t} s in game {} was never received; dropped", record.game));
            continue;
        };
        let frame = &record.frames[start + k];
        let side = |p: PlayerId| frame.player(p).map(|s| s.side);
        if side(receiver) != record.frames[b.frame].player(sender).map(|s| s.side) {
            diagnostics.note(format!(
                "pass at {t} s in game {} picked up by opponent {receiver}; dropped",
                record.game
            ));
            continue;
        }
        out.push(ResolvedPass {
            frame: b.frame,
            reception: start + k,
            sender,
            receiver,
        });
    }
    out
}

/// Located passes of a possession, for fitting the spatial fields. Passes to
/// a receiver without a known position, or with a missing coordinate, are
/// left out.
pub fn pass_locations(record: &GameRecord, possession: &Possession) -> (Vec<LocatedPass>, Diagnostics) {
    let mut diagnostics = Diagnostics::default();
    if possession.excluded {
        return (Vec::new(), diagnostics);
    }
    let carriers = attribute_carriers(&record.frames[possession.frames()]);
    let passes = resolve_passes(record, possession, &carriers, &mut diagnostics);
    let located = passes
        .into_iter()
        .filter_map(|p| {
            let at = |frame: usize, who: PlayerId| record.frames[frame].player(who).and_then(|s| s.location);
            Some(LocatedPass {
                sender: p.sender,
                receiver: p.receiver,
                receiver_position: *record.positions.get(&p.receiver)?,
                sender_location: at(p.frame, p.sender)?,
                receiver_location: at(p.reception, p.receiver)?,
            })
        })
        .collect();
    (located, diagnostics)
}

/// Cells and events of one possession, with raw player ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PossessionCovariates {
    pub covariates: Vec<CovariateRecord<f64>>,
    pub events: Vec<PassEvent>,
    pub diagnostics: Diagnostics,
}

/// Dribble flag per possession frame: set from the carrier's first dribble
/// annotation until the carrier changes.
fn dribble_latch(record: &GameRecord, possession: &Possession, carriers: &[Option<PlayerId>]) -> Vec<bool> {
    let dribbles: BTreeSet<(usize, PlayerId)> = record
        .annotations
        .iter()
        .filter(|b| b.annotation.kind == PlayKind::Dribble)
        .filter_map(|b| b.annotation.player.map(|p| (b.frame, p)))
        .collect();
    let mut latch = false;
    let mut out = Vec::with_capacity(carriers.len());
    for (k, c) in carriers.iter().enumerate() {
        if k > 0 && carriers[k - 1] != *c {
            latch = false;
        }
        if let Some(p) = c {
            latch |= dribbles.contains(&(possession.start_frame + k, *p));
        }
        out.push(latch);
    }
    out
}

/// One record per (interval, teammate of the carrier) for a possession.
///
/// Intervals are consecutive runs of `frames_per_interval` frames from the
/// start of the possession (the last one may be shorter). Each is indexed by
/// its first frame's position in the game and takes its covariates from that
/// frame. Intervals without a carrier, or where the carrier, a teammate or a
/// defender lacks coordinates, are skipped.
pub fn extract_covariates(
    record: &GameRecord,
    possession: &Possession,
    fields: &FieldStore,
    options: &CovariateOptions,
) -> Result<PossessionCovariates> {
    if options.frames_per_interval == 0 {
        return Err(Error::InvalidInput("frames_per_interval must be positive".into()));
    }
    let mut out = PossessionCovariates::default();
    if possession.excluded {
        return Ok(out);
    }
    let game = record.game;
    let start = possession.start_frame;
    let carriers = attribute_carriers(&record.frames[possession.frames()]);
    let latch = dribble_latch(record, possession, &carriers);
    let passes = resolve_passes(record, possession, &carriers, &mut out.diagnostics);
    let uniform = SpatialField::uniform();

    for first in possession.frames().step_by(options.frames_per_interval) {
        let last = (first + options.frames_per_interval - 1).min(possession.end_frame);
        let frame = &record.frames[first];
        let Some(carrier) = carriers[first - start] else {
            continue;
        };
        let skip = |why: &str| format!("interval at {} s in game {game} skipped: {why}", frame.timestamp);
        let Some(me) = frame.player(carrier) else {
            out.diagnostics.note(skip(&format!("carrier {carrier} not in frame")));
            continue;
        };
        if frame.players.iter().any(|p| p.location.is_none()) {
            out.diagnostics.note(skip("missing player coordinates"));
            continue;
        }
        let loc = |p: &super::PlayerSnapshot| p.location.expect("checked above");
        let origin = loc(me);
        let mut mates: Vec<(PlayerId, CourtLocation)> = frame
            .players
            .iter()
            .filter(|p| p.side == me.side && p.player != carrier)
            .map(|p| (p.player, loc(p)))
            .collect();
        let defenders: Vec<CourtLocation> = frame.players.iter().filter(|p| p.side != me.side).map(loc).collect();
        if mates.len() != 4 {
            out.diagnostics.note(skip(&format!("{} teammates on court", mates.len())));
            continue;
        }
        if defenders.is_empty() {
            out.diagnostics.note(skip("no defenders on court"));
            continue;
        }
        mates.sort_by(|a, b| a.1.distance(&origin).total_cmp(&b.1.distance(&origin)).then(a.0.cmp(&b.0)));
        let nearest_defender = defenders.iter().map(|d| d.distance(&origin)).fold(f64::INFINITY, f64::min);
        let dt = (last + 1 - first) as f64 / FRAME_RATE;
        let xi_sender = fields.sender_field(carrier).evaluate(origin);
        for (rank, &(mate, at)) in mates.iter().enumerate() {
            let receiver_field = match record.positions.get(&mate) {
                Some(&pos) => fields.receiver_field(carrier, pos),
                None => &uniform,
            };
            out.covariates.push(CovariateRecord {
                game,
                interval_index: first as u32,
                sender: carrier,
                receiver: mate,
                w: [
                    1.0,
                    if latch[first - start] { 1.0 } else { 0.0 },
                    nearest_defender.max(MIN_DISTANCE).ln(),
                    (rank + 1) as f64,
                    openness(origin, at, &defenders),
                ],
                xi_at_sender: xi_sender,
                xi_at_receiver: receiver_field.evaluate(at),
                interval_length: dt,
            });
        }
        let mut in_interval = passes.iter().filter(|p| (first..=last).contains(&p.frame));
        if let Some(p) = in_interval.next() {
            if p.sender != carrier || !mates.iter().any(|m| m.0 == p.receiver) {
                out.diagnostics.note(skip(&format!("pass {} -> {} does not match the carrier's teammates", p.sender, p.receiver)));
            } else {
                out.events.push(PassEvent {
                    game,
                    possession: possession.id,
                    interval_index: first as u32,
                    sender: p.sender,
                    receiver: p.receiver,
                });
            }
            if in_interval.next().is_some() {
                out.diagnostics.note(format!(
                    "more than one pass in the interval at {} s in game {game}; kept the first",
                    frame.timestamp
                ));
            }
        }
    }
    Ok(out)
}

/// Everything derived from one game.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedGame {
    pub record: GameRecord,
    pub possessions: Vec<Possession>,
    pub n_cells: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    /// Players re-indexed through `registry`.
    pub dataset: Dataset<f64>,
    pub registry: PlayerRegistry,
    pub games: Vec<IngestedGame>,
    /// Keyed by raw player id.
    pub fields: FieldStore,
    /// Raw player ids.
    pub passes: Vec<LocatedPass>,
    /// Raw player id to position class, from the box scores.
    pub positions: BTreeMap<PlayerId, PositionClass>,
    pub diagnostics: Diagnostics,
}

fn by_game<T: Clone>(items: &[T], game: impl Fn(&T) -> GameId) -> BTreeMap<GameId, Vec<T>> {
    let mut map: BTreeMap<GameId, Vec<T>> = BTreeMap::new();
    for item in items {
        map.entry(game(item)).or_default().push(item.clone());
    }
    map
}

/// Merges, segments and extracts every game, fits the player fields and
/// returns a model-ready dataset.
pub fn build_dataset(
    frames: &[TrackingFrame],
    annotations: &[PlayAnnotation],
    boxscore: &[BoxScoreRow],
    options: &CovariateOptions,
) -> Result<IngestOutput> {
    let frames = by_game(frames, |f| f.game);
    let mut annotations = by_game(annotations, |a| a.game);
    let mut boxscore = by_game(boxscore, |b| b.game);
    let mut diagnostics = Diagnostics::default();
    for g in annotations.keys().chain(boxscore.keys()) {
        if !frames.contains_key(g) {
            diagnostics.note(format!("game {g} has no tracking frames; ignored"));
        }
    }

    let mut records = Vec::with_capacity(frames.len());
    let mut positions = BTreeMap::new();
    let mut passes = Vec::new();
    for (game, game_frames) in frames {
        let anns = annotations.remove(&game).unwrap_or_default();
        let rows = boxscore.remove(&game).unwrap_or_default();
        let (record, d) = merge_streams(&game_frames, &anns, &rows)?;
        diagnostics.absorb(d);
        for (&p, &pos) in &record.positions {
            if let Some(prev) = positions.insert(p, pos) {
                if prev != pos {
                    diagnostics.note(format!("player {p} changes position from {prev} to {pos} in game {game}"));
                }
            }
        }
        let possessions = segment_possessions(&record);
        for p in &possessions {
            passes.extend(pass_locations(&record, p).0);
        }
        records.push((record, possessions));
    }

    let fields = match &options.fields {
        Some(choice) => FieldStore::fit(&passes, choice)?,
        None => FieldStore::uniform(),
    };

    let mut covariates = Vec::new();
    let mut events = Vec::new();
    let mut games = Vec::with_capacity(records.len());
    for (record, possessions) in records {
        let (mut n_cells, mut n_events) = (0, 0);
        for p in &possessions {
            let part = extract_covariates(&record, p, &fields, options)?;
            n_cells += part.covariates.len();
            n_events += part.events.len();
            covariates.extend(part.covariates);
            events.extend(part.events);
            diagnostics.absorb(part.diagnostics);
        }
        log::info!(
            "game {}: {} possessions ({} excluded), {} cells, {} passes",
            record.game,
            possessions.len(),
            possessions.iter().filter(|p| p.excluded).count(),
            n_cells,
            n_events
        );
        games.push(IngestedGame {
            record,
            possessions,
            n_cells,
            n_events,
        });
    }

    let registry = PlayerRegistry::new(covariates.iter().flat_map(|c| [c.sender, c.receiver]));
    let map = |p: PlayerId| registry.index(p).expect("registered above");
    for c in &mut covariates {
        c.sender = map(c.sender);
        c.receiver = map(c.receiver);
    }
    for e in &mut events {
        e.sender = map(e.sender);
        e.receiver = map(e.receiver);
    }
    covariates.sort_by_key(|c| c.key());
    events.sort();
    let dataset = Dataset::new(registry.len(), covariates, events)?;
    Ok(IngestOutput {
        dataset,
        registry,
        games,
        fields,
        passes,
        positions,
        diagnostics,
    })
}
