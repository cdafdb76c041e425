use std::collections::BTreeMap;

use super::{BoxScoreRow, Diagnostics, PlayAnnotation, TrackingFrame};
use crate::error::{Error, Result};
use crate::model::{GameId, PlayerId, PositionClass};

/// Largest gap between an annotation and the frame it is bound to, in seconds.
pub const BIND_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundAnnotation {
    pub annotation: PlayAnnotation,
    /// Index into [`GameRecord::frames`].
    pub frame: usize,
}

/// One game's frames with annotations attached and player positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub game: GameId,
    pub frames: Vec<TrackingFrame>,
    /// Ordered by frame, then timestamp, then source order.
    pub annotations: Vec<BoundAnnotation>,
    pub positions: BTreeMap<PlayerId, PositionClass>,
    pub box_scores: Vec<BoxScoreRow>,
}

/// Binds each annotation to the nearest frame within ±0.1 s (the earlier frame
/// on an exact tie); annotations further than that are dropped and reported.
pub fn merge_streams(
    frames: &[TrackingFrame],
    annotations: &[PlayAnnotation],
    boxscore: &[BoxScoreRow],
) -> Result<(GameRecord, Diagnostics)> {
    let game = frames
        .first()
        .map(|f| f.game)
        .or_else(|| annotations.first().map(|a| a.game))
        .or_else(|| boxscore.first().map(|b| b.game))
        .ok_or_else(|| Error::InvalidInput("nothing to merge".into()))?;
    let mismatch = |what: &str, other: GameId| {
        Error::Consistency(format!("{what} belongs to game {other}, expected game {game}"))
    };
    if let Some(f) = frames.iter().find(|f| f.game != game) {
        return Err(mismatch("a tracking frame", f.game));
    }
    if let Some(a) = annotations.iter().find(|a| a.game != game) {
        return Err(mismatch("an annotation", a.game));
    }
    if let Some(b) = boxscore.iter().find(|b| b.game != game) {
        return Err(mismatch("a box-score row", b.game));
    }
    if frames.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::Consistency(format!("frames of game {game} are not strictly increasing in time")));
    }

    let mut diagnostics = Diagnostics::default();
    let times: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
    let mut bound = Vec::with_capacity(annotations.len());
    for (order, a) in annotations.iter().enumerate() {
        let after = times.partition_point(|&t| t < a.timestamp);
        let candidates = [after.checked_sub(1), (after < times.len()).then_some(after)];
        let nearest = candidates
            .into_iter()
            .flatten()
            .min_by(|&i, &j| (times[i] - a.timestamp).abs().total_cmp(&(times[j] - a.timestamp).abs()));
        match nearest {
            Some(i) if (times[i] - a.timestamp).abs() <= BIND_TOLERANCE + 1e-9 => bound.push((order, BoundAnnotation { annotation: *a, frame: i })),
            _ => diagnostics.note(format!(
                "{} annotation at {} s in game {game} has no frame within {BIND_TOLERANCE} s; dropped",
                a.kind, a.timestamp
            )),
        }
    }
    bound.sort_by(|(oa, a), (ob, b)| {
        a.frame
            .cmp(&b.frame)
            .then(a.annotation.timestamp.total_cmp(&b.annotation.timestamp))
            .then(oa.cmp(ob))
    });
    let mut positions = BTreeMap::new();
    for b in boxscore {
        if let Some(prev) = positions.insert(b.player, b.position) {
            if prev != b.position {
                return Err(Error::Consistency(format!(
                    "player {} listed as both {prev} and {} in game {game}",
                    b.player, b.position
                )));
            }
        }
    }
    Ok((
        GameRecord {
            game,
            frames: frames.to_vec(),
            annotations: bound.into_iter().map(|(_, b)| b).collect(),
            positions,
            box_scores: boxscore.to_vec(),
        },
        diagnostics,
    ))
}
