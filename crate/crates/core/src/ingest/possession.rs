use super::{GameRecord, PlayKind, TeamSide, TrackingFrame};
use crate::model::{GameId, PlayerId, PossessionId};

/// A player further than this from the ball (horizontal feet) cannot carry it.
pub const CARRIER_RADIUS: f64 = 3.0;
/// Consecutive frames a new player must be nearest to the ball before the
/// carrier changes.
pub const HYSTERESIS_FRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PossessionOutcome {
    Made,
    Missed,
    Turnover,
    /// Non-turnover stoppage such as a kicked ball.
    Reset,
}

impl PossessionOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            PossessionOutcome::Made => "made",
            PossessionOutcome::Missed => "missed",
            PossessionOutcome::Turnover => "turnover",
            PossessionOutcome::Reset => "reset",
        }
    }

    fn from_kind(kind: PlayKind) -> Option<Self> {
        match kind {
            PlayKind::ShotMade => Some(PossessionOutcome::Made),
            PlayKind::ShotMissed => Some(PossessionOutcome::Missed),
            PlayKind::Turnover => Some(PossessionOutcome::Turnover),
            PlayKind::ViolationReset => Some(PossessionOutcome::Reset),
            _ => None,
        }
    }
}

/// A run of frames `start_frame..=end_frame` of one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Possession {
    pub game: GameId,
    pub id: PossessionId,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_time: f64,
    pub end_time: f64,
    /// Side of the first annotated non-foul play, when it can be told.
    pub offense: Option<TeamSide>,
    /// `None` for foul-ended and incomplete possessions.
    pub outcome: Option<PossessionOutcome>,
    /// Ended by a foul; never reaches the model.
    pub excluded: bool,
    /// Runs to the end of the record without a terminal annotation.
    pub incomplete: bool,
}

impl Possession {
    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start_frame..=self.end_frame
    }

    pub fn n_frames(&self) -> usize {
        self.end_frame + 1 - self.start_frame
    }
}

fn side_of(frames: &[TrackingFrame], player: PlayerId) -> Option<TeamSide> {
    frames.iter().find_map(|f| f.player(player).map(|p| p.side))
}

/// Splits the record's frames into possessions.
///
/// A possession closes on the frame of a made shot, missed shot, turnover,
/// reset violation or foul; the next one starts on the following frame. A
/// boundary on a frame already closed by an earlier boundary is ignored.
/// Frames after the last boundary form one possession flagged incomplete.
pub fn segment_possessions(record: &GameRecord) -> Vec<Possession> {
    let frames = &record.frames;
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut offense = None;
    let make = |start: usize, end: usize, offense, outcome, excluded, incomplete, id: usize| Possession {
        game: record.game,
        id: PossessionId(id as u32),
        start_frame: start,
        end_frame: end,
        start_time: frames[start].timestamp,
        end_time: frames[end].timestamp,
        offense,
        outcome,
        excluded,
        incomplete,
    };
    for b in &record.annotations {
        if b.frame < start {
            continue;
        }
        let kind = b.annotation.kind;
        if offense.is_none() && kind != PlayKind::Foul {
            offense = b.annotation.player.and_then(|p| side_of(&frames[start..], p));
        }
        if kind.ends_possession() {
            let excluded = kind == PlayKind::Foul;
            out.push(make(start, b.frame, offense, PossessionOutcome::from_kind(kind), excluded, false, out.len()));
            start = b.frame + 1;
            offense = None;
        }
    }
    if start < frames.len() {
        out.push(make(start, frames.len() - 1, offense, None, false, true, out.len()));
    }
    out
}

fn nearest_to_ball(frame: &TrackingFrame) -> Option<PlayerId> {
    let ball = frame.ball?;
    frame
        .players
        .iter()
        .filter_map(|p| p.location.map(|l| (p.player, l.distance(&ball))))
        .filter(|&(_, d)| d <= CARRIER_RADIUS)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(id, _)| id)
}

/// Ball carrier per frame.
///
/// The candidate in a frame is the nearest player within [`CARRIER_RADIUS`]
/// of the ball (lower id on a tie). A candidate different from the current
/// carrier takes over once it has been the candidate for
/// [`HYSTERESIS_FRAMES`] consecutive frames, starting from the first frame of
/// that run. Frames with no candidate keep the current carrier.
pub fn attribute_carriers(frames: &[TrackingFrame]) -> Vec<Option<PlayerId>> {
    let mut out = vec![None; frames.len()];
    let mut current: Option<PlayerId> = None;
    let mut run: Option<(PlayerId, usize, usize)> = None;
    for (k, frame) in frames.iter().enumerate() {
        match nearest_to_ball(frame) {
            Some(c) if Some(c) != current => {
                let (id, first, len) = match run {
                    Some((id, first, len)) if id == c => (id, first, len + 1),
                    _ => (c, k, 1),
                };
                if len >= HYSTERESIS_FRAMES {
                    current = Some(id);
                    out[first..k].fill(current);
                    run = None;
                } else {
                    run = Some((id, first, len));
                }
            }
            Some(_) => run = None,
            None => {}
        }
        out[k] = current;
    }
    out
}
