//! Forward simulation from known parameters, train/test splitting, and a
//! deliberately naive log-likelihood used to cross-check the model code.
//!
//! Each game has one side of `n_players`. Every 25 intervals a fresh lineup of
//! five is drawn (one possession); within it the carrier is drawn uniformly per
//! interval and the other four are the candidate receivers. Each receiver gets
//! `log θ = x·β + u·v + ε`, an exponential arrival time with rate `θ`, and the
//! earliest arrival inside the interval (if any) is the pass.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    CovariateRecord, Dataset, GameId, HazardLattice, LatentFactorSet, ModelParameters, PassEvent, PlayerId,
    PossessionId, N_COVARIATES,
};

pub const LINEUP_SIZE: usize = 5;
/// Intervals per simulated possession (lineups are redrawn between them).
pub const POSSESSION_INTERVALS: u32 = 25;
const XI_MEAN: f64 = 1.0 / 2350.0;

/// True parameters of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    /// By dyad slot `sender * n + receiver`; diagonal slots are zero.
    pub beta: Vec<[f64; N_COVARIATES]>,
    /// One per game, ascending.
    pub factors: Vec<LatentFactorSet<f64>>,
}

impl SyntheticTruth {
    /// `β`, `U`, `V` drawn independently from `N(0, 1)`.
    pub fn from_prior<R: Rng + ?Sized>(n_games: usize, n_players: usize, rank: usize, rng: &mut R) -> Self {
        let mut beta = vec![[0.0; N_COVARIATES]; n_players * n_players];
        for (slot, b) in beta.iter_mut().enumerate() {
            if slot / n_players != slot % n_players {
                for v in b.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
        }
        let factors = (0..n_games)
            .map(|g| {
                let u = DMatrix::from_fn(n_players, rank, |_, _| rng.sample(StandardNormal));
                let v = DMatrix::from_fn(n_players, rank, |_, _| rng.sample(StandardNormal));
                LatentFactorSet::new(GameId(g as u32), u, v).expect("shapes agree")
            })
            .collect();
        SyntheticTruth { beta, factors }
    }

    pub fn parameters(&self) -> Result<ModelParameters<f64>> {
        ModelParameters::from_factors(self.beta.clone(), &self.factors)
    }

    pub fn rank(&self) -> usize {
        self.factors.first().map_or(0, |f| f.rank())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_games: usize,
    pub n_players: usize,
    /// Total intervals across games, split as evenly as possible.
    pub target_observations: usize,
    pub rank: usize,
    pub seed: u64,
    /// Interval length `Δ` in seconds.
    pub interval_length: f64,
    /// Drawn from the prior when `None`.
    pub truth: Option<SyntheticTruth>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_games: 2,
            n_players: 8,
            target_observations: 10_000,
            rank: 2,
            seed: 0,
            interval_length: 0.2,
            truth: None,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_games == 0 {
            return Err(Error::InvalidInput("at least one game is required".into()));
        }
        if self.n_players < LINEUP_SIZE {
            return Err(Error::InvalidInput(format!(
                "{} players cannot field a lineup of {LINEUP_SIZE}",
                self.n_players
            )));
        }
        if self.target_observations == 0 {
            return Err(Error::InvalidInput("target observations must be positive".into()));
        }
        if !(self.interval_length > 0.0 && self.interval_length.is_finite()) {
            return Err(Error::InvalidInput(format!("interval length {} must be positive", self.interval_length)));
        }
        if let Some(t) = &self.truth {
            let n = self.n_players;
            if t.beta.len() != n * n {
                return Err(Error::Dimension(format!("truth has {} beta slots for {n} players", t.beta.len())));
            }
            if t.factors.len() != self.n_games {
                return Err(Error::Dimension(format!(
                    "truth has factors for {} games, spec has {}",
                    t.factors.len(),
                    self.n_games
                )));
            }
            for (g, f) in t.factors.iter().enumerate() {
                if f.game != GameId(g as u32) || f.n_players() != n || f.rank() != self.rank {
                    return Err(Error::Consistency(format!(
                        "true factors of game {} must be {n}×{} for game id {g}",
                        f.game, self.rank
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn intervals_per_game(&self) -> Vec<usize> {
        let base = self.target_observations / self.n_games;
        let extra = self.target_observations % self.n_games;
        (0..self.n_games).map(|g| base + usize::from(g < extra)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset<f64>,
    pub truth: SyntheticTruth,
    /// Log-hazards actually used, including `ε`.
    pub lattice: HazardLattice<f64>,
}

/// Simulates a dataset. Deterministic per `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = match &spec.truth {
        Some(t) => t.clone(),
        None => SyntheticTruth::from_prior(spec.n_games, spec.n_players, spec.rank, &mut rng),
    };
    let n = spec.n_players;
    let dt = spec.interval_length;
    let dist_w3 = Normal::new(1.5, 0.5).expect("valid normal");
    let dist_xi = Normal::new(XI_MEAN, XI_MEAN).expect("valid normal");
    let mut covariates = Vec::new();
    let mut events = Vec::new();
    let mut log_hazards = Vec::new();
    let players: Vec<u32> = (0..n as u32).collect();
    for (g, &n_intervals) in spec.intervals_per_game().iter().enumerate() {
        let game = GameId(g as u32);
        let f = &truth.factors[g];
        let mut lineup: Vec<u32> = Vec::new();
        for t in 0..n_intervals as u32 {
            if t % POSSESSION_INTERVALS == 0 {
                lineup = players.choose_multiple(&mut rng, LINEUP_SIZE).copied().collect();
            }
            let carrier = lineup[rng.random_range(0..LINEUP_SIZE)];
            let mut ranks = [1.0, 2.0, 3.0, 4.0];
            ranks.shuffle(&mut rng);
            let mut earliest: Option<(f64, u32)> = None;
            for (k, &j) in lineup.iter().filter(|&&p| p != carrier).enumerate() {
                let w = [
                    1.0,
                    if rng.random::<bool>() { 1.0 } else { 0.0 },
                    dist_w3.sample(&mut rng),
                    ranks[k],
                    rng.sample(StandardNormal),
                ];
                let xi_s = dist_xi.sample(&mut rng).max(f64::MIN_POSITIVE);
                let xi_r = dist_xi.sample(&mut rng).max(f64::MIN_POSITIVE);
                let rec = CovariateRecord {
                    game,
                    interval_index: t,
                    sender: PlayerId(carrier),
                    receiver: PlayerId(j),
                    w,
                    xi_at_sender: xi_s,
                    xi_at_receiver: xi_r,
                    interval_length: dt,
                };
                let (i, jj) = (carrier as usize, j as usize);
                let xb: f64 = rec.x().iter().zip(&truth.beta[i * n + jj]).map(|(a, b)| a * b).sum();
                let uv: f64 = (0..f.rank()).map(|r| f.u[(i, r)] * f.v[(jj, r)]).sum();
                let eps: f64 = rng.sample(StandardNormal);
                let log_theta = xb + uv + eps;
                let arrival = Exp::new(log_theta.exp())
                    .map(|e| e.sample(&mut rng))
                    .unwrap_or(f64::INFINITY);
                if arrival < dt && earliest.is_none_or(|(a, _)| arrival < a) {
                    earliest = Some((arrival, j));
                }
                covariates.push(rec);
                log_hazards.push(log_theta);
            }
            if let Some((_, j)) = earliest {
                events.push(PassEvent {
                    game,
                    possession: PossessionId(t / POSSESSION_INTERVALS),
                    interval_index: t,
                    sender: PlayerId(carrier),
                    receiver: PlayerId(j),
                });
            }
        }
    }
    let keys = covariates.iter().map(|c| c.key()).collect();
    let lattice = HazardLattice::new(keys, log_hazards)?;
    let dataset = Dataset::new(n, covariates, events)?;
    Ok(SyntheticData {
        dataset,
        truth,
        lattice,
    })
}

/// Per-game temporal split: the first `⌊fraction · N_g⌋` intervals of each game
/// train, the rest test.
pub fn split_train_test(data: &Dataset<f64>, fraction: f64) -> Result<(Dataset<f64>, Dataset<f64>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut intervals: BTreeMap<GameId, Vec<u32>> = BTreeMap::new();
    for c in &data.covariates {
        intervals.entry(c.game).or_default().push(c.interval_index);
    }
    let mut cutoff: HashMap<GameId, u32> = HashMap::new();
    for (g, mut ts) in intervals {
        ts.sort_unstable();
        ts.dedup();
        let n_train = (fraction * ts.len() as f64).floor() as usize;
        // First test interval, or one past the last for an empty test part.
        let cut = ts.get(n_train).copied().unwrap_or(u32::MAX);
        cutoff.insert(g, cut);
    }
    let train = data.filter(|g, t| t < cutoff[&g]);
    let test = data.filter(|g, t| t >= cutoff[&g]);
    Ok((train, test))
}

/// Log-likelihood by a plain loop, sharing no code with the model module.
pub fn oracle_loglik(
    events: &[PassEvent],
    lattice: &HazardLattice<f64>,
    covariates: &[CovariateRecord<f64>],
) -> Result<f64> {
    let mut hit: HashSet<(u32, u32, u32, u32)> = HashSet::new();
    for e in events {
        hit.insert((e.game.0, e.interval_index, e.sender.0, e.receiver.0));
    }
    let mut value_of: HashMap<(u32, u32, u32, u32), f64> = HashMap::new();
    for (k, v) in lattice.keys().iter().zip(lattice.values()) {
        value_of.insert((k.game.0, k.interval, k.sender.0, k.receiver.0), *v);
    }
    let mut matched = 0usize;
    let mut total = 0.0;
    for c in covariates {
        let key = (c.game.0, c.interval_index, c.sender.0, c.receiver.0);
        let Some(&lh) = value_of.get(&key) else {
            return Err(Error::Consistency(format!("no lattice value for cell {key:?}")));
        };
        if !lh.is_finite() {
            return Err(Error::NonFinite(format!("log hazard of cell {key:?}")));
        }
        let rate_times_length = lh.exp() * c.interval_length;
        if hit.contains(&key) {
            matched += 1;
            total += lh + c.interval_length.ln() - rate_times_length;
        } else {
            total -= rate_times_length;
        }
    }
    if matched != hit.len() {
        return Err(Error::Consistency(format!(
            "{} of {} events fall on no covariate cell",
            hit.len() - matched,
            hit.len()
        )));
    }
    Ok(total)
}
