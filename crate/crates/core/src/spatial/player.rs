//! Per-player sender and receiver fields.
//!
//! `ξ̄_i` is fitted to where player `i` stood when passing. `ξ̄̃_{i,pos}` is
//! fitted to where teammates of position class `pos` stood when they received
//! a pass from `i`. A position class without receptions gets the uniform field.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{PlayerId, PositionClass};
use crate::num::Real;
use crate::spatial::court::{tile_counts, CourtLocation};
use crate::spatial::field::{fit_field, normalize_field, LambdaChoice, SpatialField};

/// A completed pass with where both players stood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatedPass<T = f64> {
    pub sender: PlayerId,
    pub receiver: PlayerId,
    pub receiver_position: PositionClass,
    /// Sender location when the ball left.
    pub sender_location: CourtLocation<T>,
    /// Receiver location when the ball arrived.
    pub receiver_location: CourtLocation<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerFields<T: Real = f64> {
    pub xi: SpatialField<T>,
    /// One entry per position class.
    pub xi_tilde: BTreeMap<PositionClass, SpatialField<T>>,
}

fn fit_locations<T: Real>(locations: &[CourtLocation<T>], choice: &LambdaChoice<T>) -> Result<SpatialField<T>> {
    normalize_field(fit_field(&tile_counts(locations)?, choice)?)
}

/// Fits `player`'s sender field and three receiver fields from the passes
/// the player made. Passes by other players are ignored.
pub fn build_player_fields<T: Real>(
    passes: &[LocatedPass<T>],
    player: PlayerId,
    choice: &LambdaChoice<T>,
) -> Result<PlayerFields<T>> {
    let own: Vec<&LocatedPass<T>> = passes.iter().filter(|p| p.sender == player).collect();
    if own.is_empty() {
        return Err(Error::InvalidInput(format!("player {player} has no recorded passes")));
    }
    let senders: Vec<CourtLocation<T>> = own.iter().map(|p| p.sender_location).collect();
    let xi = fit_locations(&senders, choice)?;
    let mut xi_tilde = BTreeMap::new();
    for pos in PositionClass::ALL {
        let received: Vec<CourtLocation<T>> = own
            .iter()
            .filter(|p| p.receiver_position == pos)
            .map(|p| p.receiver_location)
            .collect();
        let field = if received.is_empty() {
            SpatialField::uniform()
        } else {
            fit_locations(&received, choice)?
        };
        xi_tilde.insert(pos, field);
    }
    Ok(PlayerFields { xi, xi_tilde })
}

/// Fields for a set of players. Lookups for players without fitted fields
/// return the uniform field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStore<T: Real = f64> {
    players: BTreeMap<PlayerId, PlayerFields<T>>,
    uniform: SpatialField<T>,
}

impl<T: Real> Default for FieldStore<T> {
    fn default() -> Self {
        FieldStore {
            players: BTreeMap::new(),
            uniform: SpatialField::uniform(),
        }
    }
}

impl<T: Real> FieldStore<T> {
    /// Every player uses the uniform field.
    pub fn uniform() -> Self {
        Self::default()
    }

    /// Fits fields for every player who made at least one pass.
    pub fn fit(passes: &[LocatedPass<T>], choice: &LambdaChoice<T>) -> Result<Self> {
        let mut store = Self::default();
        let senders: std::collections::BTreeSet<PlayerId> = passes.iter().map(|p| p.sender).collect();
        for player in senders {
            store.insert(player, build_player_fields(passes, player, choice)?);
        }
        Ok(store)
    }

    pub fn insert(&mut self, player: PlayerId, fields: PlayerFields<T>) {
        self.players.insert(player, fields);
    }

    pub fn get(&self, player: PlayerId) -> Option<&PlayerFields<T>> {
        self.players.get(&player)
    }

    pub fn players(&self) -> impl Iterator<Item = (PlayerId, &PlayerFields<T>)> + '_ {
        self.players.iter().map(|(id, f)| (*id, f))
    }

    pub fn sender_field(&self, player: PlayerId) -> &SpatialField<T> {
        self.players.get(&player).map_or(&self.uniform, |f| &f.xi)
    }

    pub fn receiver_field(&self, player: PlayerId, position: PositionClass) -> &SpatialField<T> {
        self.players
            .get(&player)
            .and_then(|f| f.xi_tilde.get(&position))
            .unwrap_or(&self.uniform)
    }
}
