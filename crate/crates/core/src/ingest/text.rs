use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    BoxScoreRow, Diagnostics, Parsed, PlayAnnotation, PlayKind, PlayerSnapshot, TeamSide, TrackingFrame,
    MAX_PLAYERS_PER_FRAME,
};
use crate::error::{Error, Result};
use crate::model::{GameId, PlayerId, PositionClass};
use crate::spatial::CourtLocation;

pub(super) const MISSING: &str = "NA";
const TRACKING_TAG: &str = "#tracking/v1";
const PLAYBYPLAY_TAG: &str = "#playbyplay/v1";
const BOXSCORE_TAG: &str = "#boxscore/v1";

/// Splits off and checks the schema line. `None` for a body with no content.
fn body<'a>(text: &'a str, tag: &str) -> Result<Option<impl Iterator<Item = (usize, &'a str)>>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let first = lines.by_ref().find(|(_, l)| !l.trim().is_empty());
    let Some((no, first)) = first else {
        return Ok(None);
    };
    let first = first.trim();
    if first != tag {
        let family = tag.split('/').next().unwrap_or(tag);
        return Err(if first.starts_with(&format!("{family}/")) {
            Error::Schema(format!("line {no}: unsupported schema version `{first}`, expected `{tag}`"))
        } else {
            Error::Schema(format!("line {no}: expected schema line `{tag}`, found `{first}`"))
        });
    }
    Ok(Some(lines.filter(|(_, l)| !l.trim().is_empty())))
}

fn fields(line: &str) -> std::result::Result<Vec<&str>, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.iter().any(|s| s.is_empty()) {
        return Err("empty field (missing values must be written as NA)".into());
    }
    Ok(f)
}

pub(super) fn num(s: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad {what} `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what}"));
    }
    Ok(v)
}

pub(super) fn opt_num(s: &str, what: &str) -> std::result::Result<Option<f64>, String> {
    if s == MISSING {
        Ok(None)
    } else {
        num(s, what).map(Some)
    }
}

pub(super) fn int(s: &str, what: &str) -> std::result::Result<u32, String> {
    s.parse().map_err(|_| format!("bad {what} `{s}`"))
}

pub(super) fn opt_location(x: &str, y: &str, what: &str) -> std::result::Result<Option<CourtLocation>, String> {
    match (opt_num(x, what)?, opt_num(y, what)?) {
        (Some(x), Some(y)) => Ok(Some(CourtLocation::new(x, y))),
        (None, None) => Ok(None),
        _ => Err(format!("{what} has only one coordinate")),
    }
}

fn tracking_row(f: &[&str]) -> std::result::Result<TrackingFrame, String> {
    if f.len() < 5 || !(f.len() - 5).is_multiple_of(4) {
        return Err(format!("{} fields; expected 5 plus groups of 4", f.len()));
    }
    let groups = (f.len() - 5) / 4;
    if groups > MAX_PLAYERS_PER_FRAME {
        return Err(format!("{groups} players in one frame"));
    }
    let game = GameId(int(f[0], "game id")?);
    let timestamp = num(f[1], "timestamp")?;
    if timestamp < 0.0 {
        return Err("negative timestamp".into());
    }
    let ball = opt_location(f[2], f[3], "ball location")?;
    let ball_height = opt_num(f[4], "ball height")?;
    let mut players = Vec::with_capacity(groups);
    for g in f[5..].chunks(4) {
        let side = TeamSide::from_code(g[0]).ok_or_else(|| format!("bad team side `{}`", g[0]))?;
        let player = PlayerId(int(g[1], "player id")?);
        if players.iter().any(|p: &PlayerSnapshot| p.player == player) {
            return Err(format!("player {player} listed twice"));
        }
        players.push(PlayerSnapshot {
            player,
            side,
            location: opt_location(g[2], g[3], "player location")?,
        });
    }
    Ok(TrackingFrame {
        game,
        timestamp,
        ball,
        ball_height,
        players,
    })
}

/// Rows as already split fields, tagged with their source line.
pub(super) type Rows<'a> = Vec<(usize, std::result::Result<Vec<&'a str>, String>)>;

/// Validated frames. Rows that fail to parse, or whose timestamp does not
/// increase within their game, are skipped and counted.
pub(super) fn tracking_rows(rows: Rows<'_>) -> Parsed<TrackingFrame> {
    let mut diagnostics = Diagnostics::default();
    let mut items = Vec::new();
    let mut last: HashMap<GameId, f64> = HashMap::new();
    for (no, row) in rows {
        match row.and_then(|f| tracking_row(&f)) {
            Ok(frame) => {
                if let Some(&prev) = last.get(&frame.game) {
                    if frame.timestamp <= prev {
                        diagnostics.corrupt(no, format!("timestamp {} does not increase (previous {prev})", frame.timestamp));
                        continue;
                    }
                }
                last.insert(frame.game, frame.timestamp);
                items.push(frame);
            }
            Err(why) => diagnostics.corrupt(no, why),
        }
    }
    Parsed { items, diagnostics }
}

fn split_body<'a>(text: &'a str, tag: &str) -> Result<Rows<'a>> {
    Ok(match body(text, tag)? {
        Some(lines) => lines.map(|(no, l)| (no, fields(l))).collect(),
        None => Vec::new(),
    })
}

/// Frames in file order; see [`tracking_rows`] for what is skipped.
pub fn parse_tracking(text: &str) -> Result<Parsed<TrackingFrame>> {
    Ok(tracking_rows(split_body(text, TRACKING_TAG)?))
}

pub(super) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| v.to_string())
}

pub fn tracking_to_text(frames: &[TrackingFrame]) -> String {
    let mut out = format!("{TRACKING_TAG}\n");
    for f in frames {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            f.game,
            f.timestamp,
            fmt_opt(f.ball.map(|b| b.x)),
            fmt_opt(f.ball.map(|b| b.y)),
            fmt_opt(f.ball_height)
        );
        for p in &f.players {
            let _ = write!(
                out,
                ",{},{},{},{}",
                p.side.code(),
                p.player,
                fmt_opt(p.location.map(|l| l.x)),
                fmt_opt(p.location.map(|l| l.y))
            );
        }
        out.push('\n');
    }
    out
}

/// Resolves a source label: canonical names first, then `aliases`.
pub(crate) fn resolve_kind(label: &str, aliases: &[(&str, PlayKind)], diagnostics: &mut Diagnostics) -> PlayKind {
    let norm = label.trim().to_ascii_lowercase();
    if let Some(k) = PlayKind::from_label(&norm) {
        return k;
    }
    if let Some(&(_, k)) = aliases.iter().find(|(a, _)| a.eq_ignore_ascii_case(&norm)) {
        return k;
    }
    diagnostics.unknown_labels += 1;
    diagnostics.note(format!("unknown event label `{label}` mapped to other"));
    PlayKind::Other
}

pub(super) fn playbyplay_rows(rows: Rows<'_>, aliases: &[(&str, PlayKind)]) -> Parsed<PlayAnnotation> {
    let mut diagnostics = Diagnostics::default();
    let mut items = Vec::new();
    for (no, row) in rows {
        let row = row.and_then(|f| {
            if f.len() != 4 {
                return Err(format!("{} fields; expected 4", f.len()));
            }
            let game = GameId(int(f[0], "game id")?);
            let timestamp = num(f[1], "timestamp")?;
            let player = if f[3] == MISSING {
                None
            } else {
                Some(PlayerId(int(f[3], "player id")?))
            };
            Ok((game, timestamp, f[2].to_string(), player))
        });
        match row {
            Ok((game, timestamp, label, player)) => {
                let kind = resolve_kind(&label, aliases, &mut diagnostics);
                items.push(PlayAnnotation {
                    game,
                    timestamp,
                    kind,
                    player,
                });
            }
            Err(why) => diagnostics.corrupt(no, why),
        }
    }
    Parsed { items, diagnostics }
}

pub fn parse_playbyplay(text: &str) -> Result<Parsed<PlayAnnotation>> {
    Ok(playbyplay_rows(split_body(text, PLAYBYPLAY_TAG)?, &[]))
}

pub fn playbyplay_to_text(annotations: &[PlayAnnotation]) -> String {
    let mut out = format!("{PLAYBYPLAY_TAG}\n");
    for a in annotations {
        let player = a.player.map_or_else(|| MISSING.to_string(), |p| p.to_string());
        let _ = writeln!(out, "{},{},{},{player}", a.game, a.timestamp, a.kind);
    }
    out
}

pub(super) fn boxscore_rows(rows: Rows<'_>) -> Parsed<BoxScoreRow> {
    let mut diagnostics = Diagnostics::default();
    let mut items = Vec::new();
    for (no, row) in rows {
        let row = row.and_then(|f| {
            if f.len() != 6 {
                return Err(format!("{} fields; expected 6", f.len()));
            }
            Ok(BoxScoreRow {
                game: GameId(int(f[0], "game id")?),
                player: PlayerId(int(f[1], "player id")?),
                position: PositionClass::from_code(f[2]).ok_or_else(|| format!("bad position `{}`", f[2]))?,
                points: int(f[3], "points")?,
                assists: int(f[4], "assists")?,
                rebounds: int(f[5], "rebounds")?,
            })
        });
        match row {
            Ok(r) => items.push(r),
            Err(why) => diagnostics.corrupt(no, why),
        }
    }
    Parsed { items, diagnostics }
}

pub fn parse_boxscore(text: &str) -> Result<Parsed<BoxScoreRow>> {
    Ok(boxscore_rows(split_body(text, BOXSCORE_TAG)?))
}

pub fn boxscore_to_text(rows: &[BoxScoreRow]) -> String {
    let mut out = format!("{BOXSCORE_TAG}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.game,
            r.player,
            r.position.code(),
            r.points,
            r.assists,
            r.rebounds
        );
    }
    out
}
