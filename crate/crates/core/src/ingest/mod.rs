//! Tracking, play-by-play and box-score ingest.
//!
//! Raw player ids are the source's own integers. They are mapped onto the
//! contiguous model indices `0..n` only when a [`Dataset`](crate::model::Dataset)
//! is built (see [`PlayerRegistry`]).
//!
//! Line formats (comma separated, UTF-8, first line is the schema tag):
//!
//! ```text
//! #tracking/v1
//! game_id,timestamp_s,ball_x,ball_y,ball_z[,side,player_id,x,y]{0..10}
//! #playbyplay/v1
//! game_id,timestamp_s,event_kind,player_id
//! #boxscore/v1
//! game_id,player_id,position,points,assists,rebounds
//! ```
//!
//! `side` is `H` or `A`. A missing value is the token `NA`; an empty field is a
//! corrupt row. The same content is also accepted as markup, see [`markup`].

mod covariates;
pub mod markup;
mod merge;
mod possession;
mod text;

pub use covariates::{
    build_dataset, extract_covariates, openness, pass_locations, CovariateOptions, IngestOutput, IngestedGame,
    PlayerRegistry, PossessionCovariates, MIN_DISTANCE, OPENNESS_CAP,
};
pub use merge::{merge_streams, BoundAnnotation, GameRecord, BIND_TOLERANCE};
pub use possession::{attribute_carriers, segment_possessions, Possession, PossessionOutcome, CARRIER_RADIUS, HYSTERESIS_FRAMES};
pub use text::{
    boxscore_to_text, parse_boxscore, parse_playbyplay, parse_tracking, playbyplay_to_text, tracking_to_text,
};

use std::fmt;

use crate::model::{GameId, PlayerId, PositionClass};
use crate::spatial::CourtLocation;

/// Tracking sample rate.
pub const FRAME_RATE: f64 = 25.0;
/// Most players a frame may list.
pub const MAX_PLAYERS_PER_FRAME: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TeamSide {
    Home,
    Away,
}

impl TeamSide {
    pub fn code(self) -> &'static str {
        match self {
            TeamSide::Home => "H",
            TeamSide::Away => "A",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "H" => Some(TeamSide::Home),
            "A" => Some(TeamSide::Away),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerSnapshot {
    pub player: PlayerId,
    pub side: TeamSide,
    /// `None` when the source marks the coordinates as missing.
    pub location: Option<CourtLocation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingFrame {
    pub game: GameId,
    pub timestamp: f64,
    pub ball: Option<CourtLocation>,
    pub ball_height: Option<f64>,
    /// At most ten, distinct player ids.
    pub players: Vec<PlayerSnapshot>,
}

impl TrackingFrame {
    pub fn player(&self, id: PlayerId) -> Option<&PlayerSnapshot> {
        self.players.iter().find(|p| p.player == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlayKind {
    Dribble,
    Pass,
    ShotMade,
    ShotMissed,
    Turnover,
    Foul,
    ViolationReset,
    Rebound,
    Other,
}

impl PlayKind {
    pub const ALL: [PlayKind; 9] = [
        PlayKind::Dribble,
        PlayKind::Pass,
        PlayKind::ShotMade,
        PlayKind::ShotMissed,
        PlayKind::Turnover,
        PlayKind::Foul,
        PlayKind::ViolationReset,
        PlayKind::Rebound,
        PlayKind::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PlayKind::Dribble => "dribble",
            PlayKind::Pass => "pass",
            PlayKind::ShotMade => "shot_made",
            PlayKind::ShotMissed => "shot_missed",
            PlayKind::Turnover => "turnover",
            PlayKind::Foul => "foul",
            PlayKind::ViolationReset => "violation_reset",
            PlayKind::Rebound => "rebound",
            PlayKind::Other => "other",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Whether the annotation closes a possession.
    pub fn ends_possession(self) -> bool {
        matches!(
            self,
            PlayKind::ShotMade | PlayKind::ShotMissed | PlayKind::Turnover | PlayKind::ViolationReset | PlayKind::Foul
        )
    }
}

impl fmt::Display for PlayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayAnnotation {
    pub game: GameId,
    pub timestamp: f64,
    pub kind: PlayKind,
    pub player: Option<PlayerId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxScoreRow {
    pub game: GameId,
    pub player: PlayerId,
    pub position: PositionClass,
    pub points: u32,
    pub assists: u32,
    pub rebounds: u32,
}

/// Non-fatal problems met while parsing or merging.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Rows dropped as unreadable.
    pub corrupt_rows: usize,
    /// Source labels mapped to [`PlayKind::Other`].
    pub unknown_labels: usize,
    pub messages: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn corrupt(&mut self, line: usize, why: impl fmt::Display) {
        self.corrupt_rows += 1;
        let msg = format!("line {line}: {why}");
        log::warn!("skipping corrupt row, {msg}");
        self.messages.push(msg);
    }

    pub(crate) fn note(&mut self, msg: String) {
        log::warn!("{msg}");
        self.messages.push(msg);
    }

    pub fn is_clean(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn absorb(&mut self, other: Diagnostics) {
        self.corrupt_rows += other.corrupt_rows;
        self.unknown_labels += other.unknown_labels;
        self.messages.extend(other.messages);
    }
}

/// Parsed items plus what was skipped on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub diagnostics: Diagnostics,
}
