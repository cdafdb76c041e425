//! Tab-separated export of field grids.
//!
//! ```text
//! # passnet-field v1
//! # player	601140
//! # kind	receiver
//! # position	F
//! # lambda	0.01
//! tile_x	tile_y	value
//! 0	0	0.000391...
//! ```
//!
//! One row per tile in x-major order. Floats are written in their shortest
//! round-tripping form, so parse → write is byte-stable.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{PlayerId, PositionClass};
use crate::num::Real;
use crate::spatial::court::{tile_coords, tile_index, N_TILES, TILES_X, TILES_Y};
use crate::spatial::field::SpatialField;

const MAGIC: &str = "# passnet-field v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `ξ̄_i`: where player `i` stands when passing.
    Sender,
    /// `ξ̄̃_{i,pos}`: where a receiver of a position class stands.
    Receiver,
}

impl FieldKind {
    fn as_str(self) -> &'static str {
        match self {
            FieldKind::Sender => "sender",
            FieldKind::Receiver => "receiver",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader<T = f64> {
    pub player: PlayerId,
    pub kind: FieldKind,
    pub position: Option<PositionClass>,
    pub lambda: T,
}

/// The serialized form of a field: header plus tile values.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable<T = f64> {
    pub header: FieldHeader<T>,
    pub values: Vec<T>,
}

impl<T: Real> FieldTable<T> {
    pub fn from_field(field: &SpatialField<T>, player: PlayerId, kind: FieldKind, position: Option<PositionClass>) -> Self {
        FieldTable {
            header: FieldHeader {
                player,
                kind,
                position,
                lambda: field.lambda(),
            },
            values: field.grid_values().to_vec(),
        }
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = String::with_capacity(64 + N_TILES * 32);
        let pos = h.position.map_or("-", |p| p.code());
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "# player\t{}", h.player);
        let _ = writeln!(out, "# kind\t{}", h.kind.as_str());
        let _ = writeln!(out, "# position\t{pos}");
        let _ = writeln!(out, "# lambda\t{}", h.lambda);
        out.push_str("tile_x\ttile_y\tvalue\n");
        for (k, v) in self.values.iter().enumerate() {
            let (ix, iy) = tile_coords(k);
            let _ = writeln!(out, "{ix}\t{iy}\t{v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("field table ends before {what}")))
        };
        let (no, magic) = next("the magic line")?;
        if magic != MAGIC {
            return Err(Error::Schema(format!("line {no}: expected `{MAGIC}`, found `{magic}`")));
        }
        let mut header_value = |key: &str| -> Result<(usize, String)> {
            let (no, line) = next(key)?;
            let prefix = format!("# {key}\t");
            line.strip_prefix(&prefix)
                .map(|v| (no, v.to_string()))
                .ok_or_else(|| Error::parse(no, format!("expected header `{key}`")))
        };
        let (no, player) = header_value("player")?;
        let player = PlayerId(player.parse().map_err(|_| Error::parse(no, "bad player id"))?);
        let (no, kind) = header_value("kind")?;
        let kind = match kind.as_str() {
            "sender" => FieldKind::Sender,
            "receiver" => FieldKind::Receiver,
            other => return Err(Error::parse(no, format!("unknown field kind `{other}`"))),
        };
        let (no, position) = header_value("position")?;
        let position = match position.as_str() {
            "-" => None,
            code => Some(PositionClass::from_code(code).ok_or_else(|| Error::parse(no, "bad position class"))?),
        };
        let (no, lambda) = header_value("lambda")?;
        let lambda: T = lambda.parse().map_err(|_| Error::parse(no, "bad lambda"))?;
        let (no, columns) = next("the column header")?;
        if columns != "tile_x\ttile_y\tvalue" {
            return Err(Error::parse(no, "expected column header `tile_x\\ttile_y\\tvalue`"));
        }
        let mut values = vec![None; N_TILES];
        for (no, line) in lines {
            let mut it = line.split('\t');
            let (Some(ix), Some(iy), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(Error::parse(no, "expected three tab-separated columns"));
            };
            let ix: usize = ix.parse().map_err(|_| Error::parse(no, "bad tile_x"))?;
            let iy: usize = iy.parse().map_err(|_| Error::parse(no, "bad tile_y"))?;
            if ix >= TILES_X || iy >= TILES_Y {
                return Err(Error::parse(no, format!("tile ({ix}, {iy}) is off the court")));
            }
            let v: T = v.parse().map_err(|_| Error::parse(no, "bad value"))?;
            if values[tile_index(ix, iy)].replace(v).is_some() {
                return Err(Error::parse(no, format!("tile ({ix}, {iy}) listed twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::parse(0, format!("tile {:?} missing", tile_coords(k)))))
            .collect::<Result<Vec<T>>>()?;
        Ok(FieldTable {
            header: FieldHeader {
                player,
                kind,
                position,
                lambda,
            },
            values,
        })
    }
}
