//! Half-court geometry and one-foot tile binning.

use crate::error::{Error, Result};
use crate::num::Real;

/// Half-court length (baseline to mid-court) in feet.
pub const COURT_LENGTH: f64 = 47.0;
/// Court width in feet.
pub const COURT_WIDTH: f64 = 50.0;
pub const TILES_X: usize = 47;
pub const TILES_Y: usize = 50;
/// Number of 1 ft × 1 ft tiles on the half court.
pub const N_TILES: usize = TILES_X * TILES_Y;

/// A point on the half court, in feet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourtLocation<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> CourtLocation<T> {
    pub fn new(x: T, y: T) -> Self {
        CourtLocation { x, y }
    }

    pub fn on_court(&self) -> bool {
        self.x >= T::zero() && self.x <= T::lit(COURT_LENGTH) && self.y >= T::zero() && self.y <= T::lit(COURT_WIDTH)
    }

    /// Nearest point of the half court.
    pub fn clamped(&self) -> Self {
        CourtLocation {
            x: self.x.max(T::zero()).min(T::lit(COURT_LENGTH)),
            y: self.y.max(T::zero()).min(T::lit(COURT_WIDTH)),
        }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Tile containing the (clamped) location; the far edges belong to the last tile.
    pub fn tile(&self) -> usize {
        let c = self.clamped();
        let ix = c.x.floor().as_f64() as usize;
        let iy = c.y.floor().as_f64() as usize;
        tile_index(ix.min(TILES_X - 1), iy.min(TILES_Y - 1))
    }
}

/// Flat index of tile `(ix, iy)`; tiles are stored x-major.
#[inline]
pub fn tile_index(ix: usize, iy: usize) -> usize {
    ix * TILES_Y + iy
}

#[inline]
pub fn tile_coords(k: usize) -> (usize, usize) {
    (k / TILES_Y, k % TILES_Y)
}

pub fn tile_center<T: Real>(k: usize) -> [T; 2] {
    let (ix, iy) = tile_coords(k);
    [T::lit(ix as f64 + 0.5), T::lit(iy as f64 + 0.5)]
}

pub fn tile_centers<T: Real>() -> Vec<[T; 2]> {
    (0..N_TILES).map(tile_center).collect()
}

/// Location counts over the 47 × 50 tiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    counts: Vec<u32>,
}

impl TileGrid {
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        if counts.len() != N_TILES {
            return Err(Error::Dimension(format!("{} tile counts, expected {N_TILES}", counts.len())));
        }
        Ok(TileGrid { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Counts scaled to sum to one.
    pub fn proportions<T: Real>(&self) -> Vec<T> {
        let total = T::lit(self.total() as f64);
        self.counts.iter().map(|&c| T::lit(c as f64) / total).collect()
    }

    /// Tiles with at least one location, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, _)| k)
    }
}

/// Bins locations into tiles. Off-court points are clamped onto the court
/// boundary, counted, and logged.
pub fn tile_counts<T: Real>(locations: &[CourtLocation<T>]) -> Result<TileGrid> {
    if locations.is_empty() {
        return Err(Error::InvalidInput("cannot bin zero locations into tiles".into()));
    }
    let mut counts = vec![0u32; N_TILES];
    let mut clipped = 0usize;
    for loc in locations {
        if !loc.x.is_finite() || !loc.y.is_finite() {
            return Err(Error::NonFinite(format!("court location ({}, {})", loc.x, loc.y)));
        }
        if !loc.on_court() {
            clipped += 1;
        }
        counts[loc.tile()] += 1;
    }
    if clipped > 0 {
        log::warn!("{clipped} of {} locations were off the half court and clipped", locations.len());
    }
    Ok(TileGrid { counts })
}
