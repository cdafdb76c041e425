//! Domain types of the passing model and the Poisson-process likelihood.
//!
//! The log-hazard of ball carrier `i` passing to teammate `j` during an
//! observation interval of game `g` is
//!
//! ```text
//! log θ = x · β_ij + u_ig · v_jg + ε,   ε ~ N(0, 1)
//! ```
//!
//! where `x` is the 7-vector of a [`CovariateRecord`]. Hazards are held
//! constant on each interval, so a cell with `y ∈ {0, 1}` events contributes
//! `y (log θ + log Δ) − θ Δ` to the log-likelihood.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::num::{dot, Real};

/// Number of time-varying covariates `w`.
pub const N_TIME_VARYING: usize = 5;
/// Length of the full covariate vector `x = (w, ξ̄(s_i), ξ̄̃(s_j))`.
pub const N_COVARIATES: usize = 7;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Player identifier. Inside a fitted dataset players are registered to
    /// the contiguous range `0..n`.
    PlayerId
);
id_type!(GameId);
id_type!(PossessionId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PositionClass {
    Guard,
    Forward,
    Center,
}

impl PositionClass {
    pub const ALL: [PositionClass; 3] = [PositionClass::Guard, PositionClass::Forward, PositionClass::Center];

    pub fn code(self) -> &'static str {
        match self {
            PositionClass::Guard => "G",
            PositionClass::Forward => "F",
            PositionClass::Center => "C",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s.trim() {
            "G" | "g" => Some(PositionClass::Guard),
            "F" | "f" => Some(PositionClass::Forward),
            "C" | "c" => Some(PositionClass::Center),
            _ => None,
        }
    }
}

impl fmt::Display for PositionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One observed pass from the ball carrier to a teammate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PassEvent {
    pub game: GameId,
    pub possession: PossessionId,
    pub interval_index: u32,
    pub sender: PlayerId,
    pub receiver: PlayerId,
}

impl PassEvent {
    pub fn key(&self) -> CellKey {
        CellKey {
            game: self.game,
            interval: self.interval_index,
            sender: self.sender,
            receiver: self.receiver,
        }
    }
}

/// Address of one (interval, dyad) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub game: GameId,
    pub interval: u32,
    pub sender: PlayerId,
    pub receiver: PlayerId,
}

/// Ordered (sender, receiver) pair carrying its own coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyad {
    pub sender: PlayerId,
    pub receiver: PlayerId,
}

impl Dyad {
    pub fn new(sender: u32, receiver: u32) -> Self {
        Dyad {
            sender: PlayerId(sender),
            receiver: PlayerId(receiver),
        }
    }
}

impl fmt::Display for Dyad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.sender, self.receiver)
    }
}

/// Covariates of one candidate receiver during one interval.
///
/// `w = (1, dribbling, log defender distance, closeness rank, openness)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateRecord<T = f64> {
    pub game: GameId,
    pub interval_index: u32,
    pub sender: PlayerId,
    pub receiver: PlayerId,
    pub w: [T; N_TIME_VARYING],
    /// Sender field evaluated at the carrier's location.
    pub xi_at_sender: T,
    /// Receiver field (keyed by the receiver's position class) at the receiver's location.
    pub xi_at_receiver: T,
    /// Interval length in seconds.
    pub interval_length: T,
}

impl<T: Real> CovariateRecord<T> {
    pub fn key(&self) -> CellKey {
        CellKey {
            game: self.game,
            interval: self.interval_index,
            sender: self.sender,
            receiver: self.receiver,
        }
    }

    pub fn dyad(&self) -> Dyad {
        Dyad {
            sender: self.sender,
            receiver: self.receiver,
        }
    }

    /// The full covariate vector `x`.
    pub fn x(&self) -> [T; N_COVARIATES] {
        let w = &self.w;
        [w[0], w[1], w[2], w[3], w[4], self.xi_at_sender, self.xi_at_receiver]
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("covariates of cell {:?}", self.key());
        if self.sender == self.receiver {
            return Err(Error::InvalidInput(format!("{}: sender equals receiver", ctx())));
        }
        if self.w[0] != T::one() {
            return Err(Error::InvalidInput(format!("{}: w1 must be 1, got {}", ctx(), self.w[0])));
        }
        let rank = self.w[3];
        if !(1..=4).any(|r| rank == T::from_count(r)) {
            return Err(Error::InvalidInput(format!("{}: closeness rank {} not in 1..=4", ctx(), rank)));
        }
        if self.x().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(ctx()));
        }
        if !(self.interval_length > T::zero()) || !self.interval_length.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{}: interval length {} must be positive",
                ctx(),
                self.interval_length
            )));
        }
        Ok(())
    }
}

/// Coefficients `β_ij = (η, γ, γ̃)` of one dyad, shared across games.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadCoefficients<T = f64> {
    pub eta: [T; N_TIME_VARYING],
    pub gamma: T,
    pub gamma_tilde: T,
}

impl<T: Real> DyadCoefficients<T> {
    pub fn zeros() -> Self {
        Self::from_vector([T::zero(); N_COVARIATES])
    }

    pub fn from_vector(b: [T; N_COVARIATES]) -> Self {
        DyadCoefficients {
            eta: [b[0], b[1], b[2], b[3], b[4]],
            gamma: b[5],
            gamma_tilde: b[6],
        }
    }

    pub fn to_vector(&self) -> [T; N_COVARIATES] {
        let e = &self.eta;
        [e[0], e[1], e[2], e[3], e[4], self.gamma, self.gamma_tilde]
    }
}

/// Per-game sender (`U`) and receiver (`V`) latent factors, one row per player.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactorSet<T: Real = f64> {
    pub game: GameId,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

impl<T: Real> LatentFactorSet<T> {
    pub fn zeros(game: GameId, n_players: usize, rank: usize) -> Self {
        LatentFactorSet {
            game,
            u: DMatrix::zeros(n_players, rank),
            v: DMatrix::zeros(n_players, rank),
        }
    }

    pub fn new(game: GameId, u: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        if u.shape() != v.shape() {
            return Err(Error::Dimension(format!(
                "U is {:?} but V is {:?} in game {}",
                u.shape(),
                v.shape(),
                game
            )));
        }
        Ok(LatentFactorSet { game, u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_players(&self) -> usize {
        self.u.nrows()
    }

    /// `u_i · v_j` for this game.
    #[inline]
    pub fn affinity(&self, sender: PlayerId, receiver: PlayerId) -> T {
        let (i, j) = (sender.index(), receiver.index());
        (0..self.rank()).fold(T::zero(), |acc, r| acc + self.u[(i, r)] * self.v[(j, r)])
    }

    /// The rotation-invariant inner-product matrix `U Vᵀ`.
    pub fn inner_products(&self) -> DMatrix<T> {
        &self.u * self.v.transpose()
    }
}

/// Latent log-hazards `log θ` for every (interval, dyad) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardLattice<T = f64> {
    keys: Vec<CellKey>,
    values: Vec<T>,
    index: HashMap<CellKey, usize>,
}

impl<T: Real> HazardLattice<T> {
    pub fn new(keys: Vec<CellKey>, values: Vec<T>) -> Result<Self> {
        if keys.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} lattice keys but {} values",
                keys.len(),
                values.len()
            )));
        }
        let mut index = HashMap::with_capacity(keys.len());
        for (pos, key) in keys.iter().enumerate() {
            if index.insert(*key, pos).is_some() {
                return Err(Error::Consistency(format!("duplicate lattice cell {key:?}")));
            }
        }
        Ok(HazardLattice { keys, values, index })
    }

    /// Builds a lattice aligned with `covariates`, one cell per record.
    pub fn from_covariates<F>(covariates: &[CovariateRecord<T>], mut log_hazard: F) -> Result<Self>
    where
        F: FnMut(&CovariateRecord<T>) -> T,
    {
        let keys = covariates.iter().map(|c| c.key()).collect();
        let values = covariates.iter().map(&mut log_hazard).collect();
        Self::new(keys, values)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &CellKey) -> Option<T> {
        self.index.get(key).map(|&p| self.values[p])
    }

    pub fn position(&self, key: &CellKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> &[CellKey] {
        &self.keys
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, T)> + '_ {
        self.keys.iter().zip(self.values.iter().copied())
    }

    /// Restricts the lattice to cells accepted by `keep`, preserving order.
    pub fn filter<F: Fn(&CellKey) -> bool>(&self, keep: F) -> Self {
        let (keys, values): (Vec<_>, Vec<_>) = self.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (*k, v)).unzip();
        Self::new(keys, values).expect("subset of a valid lattice is valid")
    }
}

/// Mean log-hazard `x · β + u · v`.
pub fn linear_predictor<T: Real>(x: &[T], beta: &DyadCoefficients<T>, u: &[T], v: &[T]) -> Result<T> {
    if x.len() != N_COVARIATES {
        return Err(Error::Dimension(format!("covariate vector has length {}, expected 7", x.len())));
    }
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "latent vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(dot(x, &beta.to_vector()) + dot(u, v))
}

/// Poisson log-likelihood of `y ∈ {0, 1}` events in an interval of length
/// `interval_length` with constant log-hazard `log_hazard`.
#[inline]
pub fn interval_loglik<T: Real>(event: bool, log_hazard: T, interval_length: T) -> Result<T> {
    if !log_hazard.is_finite() {
        return Err(Error::NonFinite(format!("log-hazard {log_hazard}")));
    }
    if !(interval_length > T::zero()) {
        return Err(Error::InvalidInput(format!("interval length {interval_length} must be positive")));
    }
    Ok(interval_loglik_unchecked(event, log_hazard, interval_length))
}

#[inline]
pub(crate) fn interval_loglik_unchecked<T: Real>(event: bool, log_hazard: T, interval_length: T) -> T {
    let expected = log_hazard.exp() * interval_length;
    if event {
        log_hazard + interval_length.ln() - expected
    } else {
        -expected
    }
}

/// Total log-likelihood of `events` over every lattice cell.
///
/// Every covariate record must have exactly one lattice cell and vice
/// versa; every event must land on a cell.
pub fn sequence_loglik<T: Real>(
    events: &[PassEvent],
    lattice: &HazardLattice<T>,
    covariates: &[CovariateRecord<T>],
) -> Result<T> {
    if covariates.len() != lattice.len() {
        return Err(Error::Consistency(format!(
            "{} covariate records for {} lattice cells",
            covariates.len(),
            lattice.len()
        )));
    }
    let mut observed = HashSet::with_capacity(events.len());
    for e in events {
        let key = e.key();
        if lattice.position(&key).is_none() {
            return Err(Error::Consistency(format!("event {e:?} has no lattice cell")));
        }
        observed.insert(key);
    }
    let mut seen = vec![false; lattice.len()];
    let mut total = T::zero();
    for c in covariates {
        let key = c.key();
        let pos = lattice
            .position(&key)
            .ok_or_else(|| Error::Consistency(format!("covariate cell {key:?} missing from lattice")))?;
        if std::mem::replace(&mut seen[pos], true) {
            return Err(Error::Consistency(format!("duplicate covariate record for {key:?}")));
        }
        total += interval_loglik(observed.contains(&key), lattice.values()[pos], c.interval_length)?;
    }
    Ok(total)
}

/// Events and covariates for a set of games, players registered as `0..n_players`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T = f64> {
    pub n_players: usize,
    pub covariates: Vec<CovariateRecord<T>>,
    pub events: Vec<PassEvent>,
}

impl<T: Real> Dataset<T> {
    pub fn new(n_players: usize, covariates: Vec<CovariateRecord<T>>, events: Vec<PassEvent>) -> Result<Self> {
        let data = Dataset {
            n_players,
            covariates,
            events,
        };
        data.validate()?;
        Ok(data)
    }

    /// Checks every model-level invariant of the data.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_players;
        let mut cells = HashSet::with_capacity(self.covariates.len());
        let mut receivers: HashMap<(GameId, u32), (PlayerId, usize)> = HashMap::new();
        for c in &self.covariates {
            c.validate()?;
            if c.sender.index() >= n || c.receiver.index() >= n {
                return Err(Error::Consistency(format!(
                    "cell {:?} references a player outside 0..{n}",
                    c.key()
                )));
            }
            if !cells.insert(c.key()) {
                return Err(Error::Consistency(format!("duplicate covariate record for {:?}", c.key())));
            }
            let slot = receivers.entry((c.game, c.interval_index)).or_insert((c.sender, 0));
            if slot.0 != c.sender {
                return Err(Error::Consistency(format!(
                    "interval {} of game {} has two ball carriers ({} and {})",
                    c.interval_index, c.game, slot.0, c.sender
                )));
            }
            slot.1 += 1;
            if slot.1 > 4 {
                return Err(Error::Consistency(format!(
                    "interval {} of game {} has more than 4 candidate receivers",
                    c.interval_index, c.game
                )));
            }
        }
        let mut intervals = HashSet::with_capacity(self.events.len());
        for e in &self.events {
            if e.sender == e.receiver {
                return Err(Error::InvalidInput(format!("event {e:?} passes to the carrier")));
            }
            if !cells.contains(&e.key()) {
                return Err(Error::Consistency(format!("event {e:?} has no covariate record")));
            }
            if !intervals.insert((e.game, e.interval_index)) {
                return Err(Error::Consistency(format!(
                    "more than one event in interval {} of game {}",
                    e.interval_index, e.game
                )));
            }
        }
        Ok(())
    }

    /// Games present in the data, ascending.
    pub fn games(&self) -> Vec<GameId> {
        let set: BTreeSet<GameId> = self.covariates.iter().map(|c| c.game).collect();
        set.into_iter().collect()
    }

    /// Event indicator per covariate record, in record order.
    pub fn event_flags(&self) -> Vec<bool> {
        let observed: HashSet<CellKey> = self.events.iter().map(|e| e.key()).collect();
        self.covariates.iter().map(|c| observed.contains(&c.key())).collect()
    }

    /// Number of distinct (game, interval) pairs.
    pub fn n_intervals(&self) -> usize {
        let set: HashSet<(GameId, u32)> = self.covariates.iter().map(|c| (c.game, c.interval_index)).collect();
        set.len()
    }

    /// Keeps the cells (and events) accepted by `keep`.
    pub fn filter<F: Fn(GameId, u32) -> bool>(&self, keep: F) -> Self {
        Dataset {
            n_players: self.n_players,
            covariates: self
                .covariates
                .iter()
                .filter(|c| keep(c.game, c.interval_index))
                .copied()
                .collect(),
            events: self
                .events
                .iter()
                .filter(|e| keep(e.game, e.interval_index))
                .copied()
                .collect(),
        }
    }
}

/// Point values of every model parameter: β per dyad slot and the per-game
/// inner-product matrix `U Vᵀ` (the rotation-invariant part of the factors).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T: Real = f64> {
    pub n_players: usize,
    /// Indexed by `sender * n_players + receiver`.
    pub beta: Vec<[T; N_COVARIATES]>,
    /// `U_g V_gᵀ` per game; games absent from the map contribute zero.
    pub affinity: std::collections::BTreeMap<GameId, DMatrix<T>>,
}

impl<T: Real> ModelParameters<T> {
    pub fn zeros(n_players: usize) -> Self {
        ModelParameters {
            n_players,
            beta: vec![[T::zero(); N_COVARIATES]; n_players * n_players],
            affinity: Default::default(),
        }
    }

    pub fn from_factors(beta: Vec<[T; N_COVARIATES]>, factors: &[LatentFactorSet<T>]) -> Result<Self> {
        let n_players = (beta.len() as f64).sqrt() as usize;
        if n_players * n_players != beta.len() {
            return Err(Error::Dimension(format!("{} coefficient slots is not a square", beta.len())));
        }
        let mut affinity = std::collections::BTreeMap::new();
        for f in factors {
            if f.n_players() != n_players {
                return Err(Error::Dimension(format!(
                    "factors of game {} have {} rows for {n_players} players",
                    f.game,
                    f.n_players()
                )));
            }
            affinity.insert(f.game, f.inner_products());
        }
        Ok(ModelParameters {
            n_players,
            beta,
            affinity,
        })
    }

    #[inline]
    pub fn dyad_slot(&self, sender: PlayerId, receiver: PlayerId) -> usize {
        sender.index() * self.n_players + receiver.index()
    }

    pub fn coefficients(&self, dyad: Dyad) -> DyadCoefficients<T> {
        DyadCoefficients::from_vector(self.beta[self.dyad_slot(dyad.sender, dyad.receiver)])
    }

    /// Conditional mean of the log-hazard of a cell, `x · β + u · v`.
    pub fn mean_log_hazard(&self, c: &CovariateRecord<T>) -> T {
        let b = &self.beta[self.dyad_slot(c.sender, c.receiver)];
        let uv = self
            .affinity
            .get(&c.game)
            .map_or(T::zero(), |m| m[(c.sender.index(), c.receiver.index())]);
        dot(&c.x(), b) + uv
    }

    /// Lattice of conditional-mean log-hazards for `data`.
    pub fn mean_lattice(&self, data: &Dataset<T>) -> Result<HazardLattice<T>> {
        if data.n_players > self.n_players {
            return Err(Error::Dimension(format!(
                "data has {} players, parameters cover {}",
                data.n_players, self.n_players
            )));
        }
        HazardLattice::from_covariates(&data.covariates, |c| self.mean_log_hazard(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(interval: u32, sender: u32, receiver: u32, rank: f64) -> CovariateRecord {
        CovariateRecord {
            game: GameId(0),
            interval_index: interval,
            sender: PlayerId(sender),
            receiver: PlayerId(receiver),
            w: [1.0, 0.0, 1.2, rank, 0.3],
            xi_at_sender: 0.0,
            xi_at_receiver: 0.0,
            interval_length: 1.0,
        }
    }

    #[test]
    fn linear_predictor_trivial_cases() {
        let zeros = [0.0; 7];
        let beta = DyadCoefficients::from_vector([3.0, -1.0, 2.0, 0.5, 1.0, 7.0, -2.0]);
        assert_eq!(linear_predictor(&zeros, &beta, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);

        let mut x = [0.0; 7];
        x[0] = 1.0;
        let mut b = [0.0; 7];
        b[0] = -2.0;
        let beta = DyadCoefficients::from_vector(b);
        assert_eq!(linear_predictor(&x, &beta, &[0.0], &[0.0]).unwrap(), -2.0);
    }

    #[test]
    fn linear_predictor_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut expected = 0.0;
            for k in 0..7 {
                expected += x[k] * b[k];
            }
            for r in 0..3 {
                expected += u[r] * v[r];
            }
            let beta = DyadCoefficients::from_vector(b.clone().try_into().unwrap());
            let got = linear_predictor(&x, &beta, &u, &v).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn linear_predictor_rejects_bad_dimensions() {
        let beta = DyadCoefficients::<f64>::zeros();
        assert!(matches!(
            linear_predictor(&[0.0; 6], &beta, &[0.0], &[0.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            linear_predictor(&[0.0; 7], &beta, &[0.0, 1.0], &[0.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn interval_loglik_trivial_cases() {
        assert_eq!(interval_loglik(false, 0.0, 1.0).unwrap(), -1.0);
        assert_eq!(interval_loglik(true, 0.0, 1.0).unwrap(), -1.0);
        assert!(matches!(interval_loglik(true, f64::NAN, 1.0), Err(Error::NonFinite(_))));
        assert!(matches!(interval_loglik(false, f64::INFINITY, 1.0), Err(Error::NonFinite(_))));
        assert!(interval_loglik(false, 0.0, 0.0).is_err());
    }

    #[test]
    fn interval_loglik_random_lattice_matches_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut got = 0.0;
        let mut expected = 0.0;
        for _ in 0..100 {
            let y = rng.random_bool(0.3);
            let l: f64 = rng.random_range(-4.0..2.0);
            let dt: f64 = rng.random_range(0.05..1.0);
            got += interval_loglik(y, l, dt).unwrap();
            let theta_dt = l.exp() * dt;
            expected += if y { (theta_dt).ln() - theta_dt } else { -theta_dt };
        }
        assert!((got - expected).abs() <= 1e-12 * expected.abs());
    }

    #[test]
    fn sequence_loglik_single_cell() {
        let covs = vec![cell(0, 0, 1, 1.0)];
        let lattice = HazardLattice::from_covariates(&covs, |_| 0.0).unwrap();
        assert_eq!(sequence_loglik(&[], &lattice, &covs).unwrap(), -1.0);
        let ev = PassEvent {
            game: GameId(0),
            possession: PossessionId(0),
            interval_index: 0,
            sender: PlayerId(0),
            receiver: PlayerId(1),
        };
        assert_eq!(sequence_loglik(&[ev], &lattice, &covs).unwrap(), -1.0);
    }

    #[test]
    fn sequence_loglik_rejects_missing_cells() {
        let covs = vec![cell(0, 0, 1, 1.0)];
        let lattice = HazardLattice::from_covariates(&covs, |_| 0.0).unwrap();
        let stray = PassEvent {
            game: GameId(0),
            possession: PossessionId(0),
            interval_index: 5,
            sender: PlayerId(0),
            receiver: PlayerId(1),
        };
        assert!(matches!(
            sequence_loglik(&[stray], &lattice, &covs),
            Err(Error::Consistency(_))
        ));
        let more = vec![cell(0, 0, 1, 1.0), cell(0, 0, 2, 2.0)];
        assert!(matches!(sequence_loglik(&[], &lattice, &more), Err(Error::Consistency(_))));
    }

    #[test]
    fn sequence_loglik_is_additive_over_interval_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut covs = Vec::new();
        let mut events = Vec::new();
        for t in 0..200u32 {
            for (k, r) in [1u32, 2, 3, 4].into_iter().enumerate() {
                covs.push(cell(t, 0, r, (k + 1) as f64));
            }
            if rng.random_bool(0.2) {
                events.push(PassEvent {
                    game: GameId(0),
                    possession: PossessionId(0),
                    interval_index: t,
                    sender: PlayerId(0),
                    receiver: PlayerId(rng.random_range(1..5)),
                });
            }
        }
        let lattice = HazardLattice::from_covariates(&covs, |_| rng.random_range(-3.0..1.0)).unwrap();
        let whole = sequence_loglik(&events, &lattice, &covs).unwrap();
        let split = 77;
        let part = |early: bool| {
            let keep = |t: u32| (t < split) == early;
            let c: Vec<_> = covs.iter().filter(|c| keep(c.interval_index)).copied().collect();
            let e: Vec<_> = events.iter().filter(|e| keep(e.interval_index)).copied().collect();
            let l = lattice.filter(|k| keep(k.interval));
            sequence_loglik(&e, &l, &c).unwrap()
        };
        let sum = part(true) + part(false);
        assert!((whole - sum).abs() <= 1e-10 * whole.abs());
    }

    #[test]
    fn loglik_is_monotone_in_hazard() {
        let mut prev0 = f64::INFINITY;
        let mut prev1 = f64::NEG_INFINITY;
        for k in 0..60 {
            let l = -6.0 + 0.1 * k as f64;
            let y0 = interval_loglik(false, l, 0.2).unwrap();
            let y1 = interval_loglik(true, l, 0.2).unwrap();
            assert!(y0 < prev0);
            // θΔ < 1 throughout this range
            assert!(y1 > prev1);
            prev0 = y0;
            prev1 = y1;
        }
    }

    #[test]
    fn dataset_validation_catches_invariant_breaks() {
        let good = vec![cell(0, 0, 1, 1.0), cell(0, 0, 2, 2.0)];
        assert!(Dataset::new(3, good.clone(), vec![]).is_ok());

        let mut bad_w1 = good.clone();
        bad_w1[0].w[0] = 2.0;
        assert!(Dataset::new(3, bad_w1, vec![]).is_err());

        let mut bad_rank = good.clone();
        bad_rank[1].w[3] = 5.0;
        assert!(Dataset::new(3, bad_rank, vec![]).is_err());

        let two_events = vec![
            PassEvent {
                game: GameId(0),
                possession: PossessionId(0),
                interval_index: 0,
                sender: PlayerId(0),
                receiver: PlayerId(1),
            },
            PassEvent {
                game: GameId(0),
                possession: PossessionId(0),
                interval_index: 0,
                sender: PlayerId(0),
                receiver: PlayerId(2),
            },
        ];
        assert!(Dataset::new(3, good.clone(), two_events).is_err());

        let mut two_carriers = good;
        two_carriers[1].sender = PlayerId(2);
        two_carriers[1].receiver = PlayerId(1);
        assert!(Dataset::new(3, two_carriers, vec![]).is_err());
    }

    #[test]
    fn positivity_of_hazard() {
        let l: f64 = -700.0;
        assert!(l.exp() > 0.0);
        assert!(interval_loglik(false, l, 0.2).unwrap().is_finite());
    }
}
