//! The three input streams as markup documents.
//!
//! ```xml
//! <tracking version="1">
//!   <frame game="1" t="0.04" ball_x="10.5" ball_y="20" ball_z="NA">
//!     <player side="H" id="601140" x="11" y="19.5"/>
//!   </frame>
//! </tracking>
//! <playbyplay version="1">
//!   <event game="1" t="0.04" kind="pass" player="601140"/>
//! </playbyplay>
//! <boxscore version="1">
//!   <row game="1" player="601140" position="G" points="12" assists="4" rebounds="2"/>
//! </boxscore>
//! ```
//!
//! Attribute values follow the line formats, including `NA` for a missing
//! value. Vendors that use other element or attribute names, or other event
//! labels, are read through a [`MarkupDialect`] that renames them.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::text::{boxscore_rows, fmt_opt, playbyplay_rows, tracking_rows, Rows, MISSING};
use super::{BoxScoreRow, Parsed, PlayAnnotation, PlayKind, TrackingFrame};
use crate::error::{Error, Result};

/// Maps source-specific names onto the documented ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkupDialect {
    /// `(source name, documented name)` for elements and attributes.
    pub names: Vec<(String, String)>,
    /// Extra event labels.
    pub labels: Vec<(String, PlayKind)>,
}

impl MarkupDialect {
    pub fn rename(mut self, source: &str, documented: &str) -> Self {
        self.names.push((source.to_string(), documented.to_string()));
        self
    }

    pub fn label(mut self, source: &str, kind: PlayKind) -> Self {
        self.labels.push((source.to_string(), kind));
        self
    }

    fn canonical(&self, name: &str) -> String {
        self.names
            .iter()
            .find(|(s, _)| s == name)
            .map_or_else(|| name.to_string(), |(_, c)| c.clone())
    }
}

#[derive(Debug, Clone)]
struct Element {
    line: usize,
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
}

impl Element {
    fn attr(&self, key: &str) -> std::result::Result<&str, String> {
        match self.attrs.iter().find(|(k, _)| k == key) {
            Some((_, v)) if v.trim().is_empty() => Err(format!("empty attribute `{key}` (write NA for missing)")),
            Some((_, v)) => Ok(v.trim()),
            None => Err(format!("<{}> lacks attribute `{key}`", self.name)),
        }
    }

    fn attrs_in_order<'a>(&'a self, keys: &[&str]) -> std::result::Result<Vec<&'a str>, String> {
        keys.iter().map(|k| self.attr(k)).collect()
    }
}

/// Tracks the line of a byte offset while the reader moves forward.
struct Lines<'a> {
    text: &'a str,
    offset: usize,
    line: usize,
}

impl Lines<'_> {
    fn at(&mut self, pos: u64) -> usize {
        let pos = (pos as usize).min(self.text.len());
        if pos > self.offset {
            self.line += self.text.as_bytes()[self.offset..pos].iter().filter(|&&b| b == b'\n').count();
            self.offset = pos;
        }
        self.line
    }
}

fn element(start: &BytesStart<'_>, line: usize, dialect: &MarkupDialect) -> Result<Element> {
    let name = dialect.canonical(&String::from_utf8_lossy(start.name().as_ref()));
    let mut attrs = Vec::new();
    for a in start.attributes() {
        let a = a.map_err(|e| Error::parse(line, e.to_string()))?;
        let key = dialect.canonical(&String::from_utf8_lossy(a.key.as_ref()));
        let value = a.unescape_value().map_err(|e| Error::parse(line, e.to_string()))?;
        attrs.push((key, value.into_owned()));
    }
    Ok(Element {
        line,
        name,
        attrs,
        children: Vec::new(),
    })
}

/// The root element, or `None` for a document without elements.
fn read_tree(text: &str, dialect: &MarkupDialect) -> Result<Option<Element>> {
    let mut reader = Reader::from_str(text);
    let mut lines = Lines { text, offset: 0, line: 1 };
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;
    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| Error::parse(lines.at(reader.error_position()), e.to_string()))?;
        let line = lines.at(pos);
        let done = match event {
            Event::Start(s) => {
                stack.push(element(&s, line, dialect)?);
                None
            }
            Event::Empty(s) => Some(element(&s, line, dialect)?),
            Event::End(_) => stack.pop(),
            Event::Eof => break,
            _ => None,
        };
        if let Some(el) = done {
            match stack.last_mut() {
                Some(parent) => parent.children.push(el),
                None if root.is_none() => root = Some(el),
                None => return Err(Error::parse(line, "more than one root element")),
            }
        }
    }
    if let Some(open) = stack.last() {
        return Err(Error::parse(open.line, format!("<{}> is never closed", open.name)));
    }
    Ok(root)
}

fn document(text: &str, dialect: &MarkupDialect, root_name: &str) -> Result<Vec<Element>> {
    let Some(root) = read_tree(text, dialect)? else {
        return Ok(Vec::new());
    };
    if root.name != root_name {
        return Err(Error::Schema(format!(
            "line {}: expected root <{root_name}>, found <{}>",
            root.line, root.name
        )));
    }
    match root.attrs.iter().find(|(k, _)| k == "version").map(|(_, v)| v.as_str()) {
        Some("1") => Ok(root.children),
        Some(v) => Err(Error::Schema(format!("line {}: unsupported schema version `{v}`", root.line))),
        None => Err(Error::Schema(format!("line {}: <{root_name}> has no version", root.line))),
    }
}

fn rows<'a>(
    records: &'a [Element],
    record_name: &str,
    fields: impl Fn(&'a Element) -> std::result::Result<Vec<&'a str>, String>,
) -> Rows<'a> {
    records
        .iter()
        .map(|r| {
            let row = if r.name == record_name {
                fields(r)
            } else {
                Err(format!("unexpected element <{}>", r.name))
            };
            (r.line, row)
        })
        .collect()
}

pub fn parse_tracking(text: &str, dialect: &MarkupDialect) -> Result<Parsed<TrackingFrame>> {
    let records = document(text, dialect, "tracking")?;
    Ok(tracking_rows(rows(&records, "frame", |r| {
        let mut f = r.attrs_in_order(&["game", "t", "ball_x", "ball_y", "ball_z"])?;
        for p in &r.children {
            if p.name != "player" {
                return Err(format!("unexpected element <{}> in frame", p.name));
            }
            f.extend(p.attrs_in_order(&["side", "id", "x", "y"])?);
        }
        Ok(f)
    })))
}

pub fn parse_playbyplay(text: &str, dialect: &MarkupDialect) -> Result<Parsed<PlayAnnotation>> {
    let records = document(text, dialect, "playbyplay")?;
    let aliases: Vec<(&str, PlayKind)> = dialect.labels.iter().map(|(s, k)| (s.as_str(), *k)).collect();
    Ok(playbyplay_rows(
        rows(&records, "event", |r| r.attrs_in_order(&["game", "t", "kind", "player"])),
        &aliases,
    ))
}

pub fn parse_boxscore(text: &str, dialect: &MarkupDialect) -> Result<Parsed<BoxScoreRow>> {
    let records = document(text, dialect, "boxscore")?;
    Ok(boxscore_rows(rows(&records, "row", |r| {
        r.attrs_in_order(&["game", "player", "position", "points", "assists", "rebounds"])
    })))
}

pub fn tracking_to_markup(frames: &[TrackingFrame]) -> String {
    let mut out = String::from("<tracking version=\"1\">\n");
    for f in frames {
        let _ = write!(
            out,
            "  <frame game=\"{}\" t=\"{}\" ball_x=\"{}\" ball_y=\"{}\" ball_z=\"{}\"",
            f.game,
            f.timestamp,
            fmt_opt(f.ball.map(|b| b.x)),
            fmt_opt(f.ball.map(|b| b.y)),
            fmt_opt(f.ball_height)
        );
        if f.players.is_empty() {
            out.push_str("/>\n");
            continue;
        }
        out.push_str(">\n");
        for p in &f.players {
            let _ = writeln!(
                out,
                "    <player side=\"{}\" id=\"{}\" x=\"{}\" y=\"{}\"/>",
                p.side.code(),
                p.player,
                fmt_opt(p.location.map(|l| l.x)),
                fmt_opt(p.location.map(|l| l.y))
            );
        }
        out.push_str("  </frame>\n");
    }
    out.push_str("</tracking>\n");
    out
}

pub fn playbyplay_to_markup(annotations: &[PlayAnnotation]) -> String {
    let mut out = String::from("<playbyplay version=\"1\">\n");
    for a in annotations {
        let player = a.player.map_or_else(|| MISSING.to_string(), |p| p.to_string());
        let _ = writeln!(
            out,
            "  <event game=\"{}\" t=\"{}\" kind=\"{}\" player=\"{player}\"/>",
            a.game, a.timestamp, a.kind
        );
    }
    out.push_str("</playbyplay>\n");
    out
}

pub fn boxscore_to_markup(rows: &[BoxScoreRow]) -> String {
    let mut out = String::from("<boxscore version=\"1\">\n");
    for r in rows {
        let _ = writeln!(
            out,
            "  <row game=\"{}\" player=\"{}\" position=\"{}\" points=\"{}\" assists=\"{}\" rebounds=\"{}\"/>",
            r.game, r.player, r.position, r.points, r.assists, r.rebounds
        );
    }
    out.push_str("</boxscore>\n");
    out
}
