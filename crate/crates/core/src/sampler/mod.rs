//! Metropolis-within-Gibbs inference over `(β, U, V, Θ)`.
//!
//! Each sweep
//! 1. draws every dyad's `β` from its conjugate normal full conditional given
//!    the log-hazard lattice and the latent factors,
//! 2. for each game and latent dimension draws the sender column `U[, r]`
//!    and then the receiver column `V[, r]`, again conjugately,
//! 3. refreshes each lattice cell with an independence Metropolis step whose
//!    proposal is the conditional prior `N(x·β + u·v, 1)`, so the acceptance
//!    ratio reduces to the Poisson likelihood ratio.
//!
//! All of `β`, `u`, `v` have standard normal priors.

mod chain;
pub mod io;
mod summary;

pub use chain::{run_chain, ChainOutput, Draw};
pub use summary::{interval_coverage, procrustes_rotation, summarize, FactorErrorTrace, ParameterSummary, PosteriorSummary};

use nalgebra::{Cholesky, SMatrix, SVector, U7};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{
    interval_loglik_unchecked, Dataset, Dyad, DyadCoefficients, GameId, HazardLattice, LatentFactorSet, N_COVARIATES,
};
use crate::num::{dot, Real};

type Vec7<T> = SVector<T, N_COVARIATES>;
type Mat7<T> = SMatrix<T, N_COVARIATES, N_COVARIATES>;

/// Which model is fitted. `Covariates` pins `U = V = 0` and skips step 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Latent,
    Covariates,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Latent => "latent",
            ModelKind::Covariates => "covariates",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(ModelKind::Latent),
            "covariates" => Ok(ModelKind::Covariates),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Latent dimension `R`.
    pub rank: usize,
    pub seed: u64,
    pub model: ModelKind,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 5000,
            burn_in: 1000,
            thin: 4,
            rank: 2,
            seed: 0,
            model: ModelKind::Latent,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidInput(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be positive".into()));
        }
        if self.model == ModelKind::Latent && self.rank == 0 {
            return Err(Error::InvalidInput("latent dimension must be at least 1".into()));
        }
        Ok(())
    }

    /// Latent dimension actually sampled.
    pub fn effective_rank(&self) -> usize {
        match self.model {
            ModelKind::Latent => self.rank,
            ModelKind::Covariates => 0,
        }
    }

    /// Whether the state after sweep `iteration` (1-based) is retained.
    pub fn is_retained(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in - 1).is_multiple_of(self.thin)
    }

    pub fn n_retained(&self) -> usize {
        (self.iterations - self.burn_in - 1) / self.thin + 1
    }
}

/// Current values of every unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T: Real = f64> {
    n_players: usize,
    /// `β` by dyad slot `sender * n + receiver`.
    pub beta: Vec<[T; N_COVARIATES]>,
    /// One factor set per game, ascending by game id.
    pub factors: Vec<LatentFactorSet<T>>,
    /// Aligned with the dataset's covariate records.
    pub lattice: HazardLattice<T>,
    pub iteration: usize,
    pub mh_accepted: u64,
    pub mh_proposed: u64,
}

impl<T: Real> ChainState<T> {
    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn coefficients(&self, dyad: Dyad) -> DyadCoefficients<T> {
        DyadCoefficients::from_vector(self.beta[dyad.sender.index() * self.n_players + dyad.receiver.index()])
    }

    pub fn set_coefficients(&mut self, dyad: Dyad, b: DyadCoefficients<T>) {
        let slot = dyad.sender.index() * self.n_players + dyad.receiver.index();
        self.beta[slot] = b.to_vector();
    }

    pub fn lattice_values_mut(&mut self) -> &mut [T] {
        self.lattice.values_mut()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.mh_proposed == 0 {
            0.0
        } else {
            self.mh_accepted as f64 / self.mh_proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy)]
struct Cell<T> {
    x: [T; N_COVARIATES],
    dyad: usize,
    game: usize,
    sender: usize,
    receiver: usize,
    event: bool,
    dt: T,
}

/// Index structures over a dataset shared by all conditional draws.
pub struct Sampler<'a, T: Real = f64> {
    data: &'a Dataset<T>,
    n: usize,
    rank: usize,
    games: Vec<GameId>,
    cells: Vec<Cell<T>>,
    dyad_cells: Vec<Vec<usize>>,
    /// Cholesky factor of `I + Σ x xᵀ` per dyad with cells.
    dyad_precision: Vec<Option<Cholesky<T, U7>>>,
    /// `[game][player]` → cells where the player carries the ball.
    carrier_cells: Vec<Vec<Vec<usize>>>,
    /// `[game][player]` → cells where the player is the candidate receiver.
    receiver_cells: Vec<Vec<Vec<usize>>>,
}

#[inline]
pub(crate) fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Cholesky factorization, retried once with `1e-10` added to the diagonal.
fn cholesky_with_jitter<T: Real>(m: Mat7<T>, what: impl Fn() -> String) -> Result<Cholesky<T, U7>> {
    if let Some(c) = Cholesky::new(m) {
        return Ok(c);
    }
    Cholesky::new(m + Mat7::identity() * T::lit(1e-10)).ok_or_else(|| Error::Singular(what()))
}

/// Draws from `N(P⁻¹ b, P⁻¹)` given the Cholesky factor of `P`.
fn draw_gaussian<T: Real, R: Rng + ?Sized>(precision: &Cholesky<T, U7>, b: &Vec7<T>, rng: &mut R) -> Vec7<T> {
    let mean = precision.solve(b);
    let z = Vec7::from_fn(|_, _| std_normal::<T, R>(rng));
    let lt = precision.l().transpose();
    let offset = lt.solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal");
    mean + offset
}

/// A draw from the conjugate posterior of `β` in `r = Xβ + ε`, `ε ~ N(0, 1)`,
/// `β ~ N(0, I)`: covariance `(I + Σ x xᵀ)⁻¹`, mean `(I + Σ x xᵀ)⁻¹ Σ x r`.
pub fn sample_beta_given<T: Real, R: Rng + ?Sized>(
    xs: &[[T; N_COVARIATES]],
    residuals: &[T],
    rng: &mut R,
) -> Result<[T; N_COVARIATES]> {
    if xs.len() != residuals.len() {
        return Err(Error::Dimension(format!("{} design rows for {} residuals", xs.len(), residuals.len())));
    }
    let mut p = Mat7::<T>::identity();
    let mut b = Vec7::<T>::zeros();
    for (x, r) in xs.iter().zip(residuals) {
        if !r.is_finite() {
            return Err(Error::NonFinite("residual while drawing beta".into()));
        }
        let xv = Vec7::from_column_slice(x);
        p += xv * xv.transpose();
        b += xv * *r;
    }
    let chol = cholesky_with_jitter(p, || "beta precision".into())?;
    let mut out = [T::zero(); N_COVARIATES];
    out.copy_from_slice(draw_gaussian(&chol, &b, rng).as_slice());
    Ok(out)
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(data: &'a Dataset<T>, rank: usize) -> Result<Self> {
        data.validate()?;
        let n = data.n_players;
        let games = data.games();
        let game_pos = |g: GameId| games.binary_search(&g).expect("game listed");
        let flags = data.event_flags();
        let cells: Vec<Cell<T>> = data
            .covariates
            .iter()
            .zip(flags)
            .map(|(c, event)| Cell {
                x: c.x(),
                dyad: c.sender.index() * n + c.receiver.index(),
                game: game_pos(c.game),
                sender: c.sender.index(),
                receiver: c.receiver.index(),
                event,
                dt: c.interval_length,
            })
            .collect();
        let mut dyad_cells = vec![Vec::new(); n * n];
        let mut carrier_cells = vec![vec![Vec::new(); n]; games.len()];
        let mut receiver_cells = vec![vec![Vec::new(); n]; games.len()];
        for (k, c) in cells.iter().enumerate() {
            dyad_cells[c.dyad].push(k);
            carrier_cells[c.game][c.sender].push(k);
            receiver_cells[c.game][c.receiver].push(k);
        }
        let dyad_precision = dyad_cells
            .iter()
            .enumerate()
            .map(|(slot, ks)| {
                if ks.is_empty() {
                    return Ok(None);
                }
                let mut p = Mat7::<T>::identity();
                for &k in ks {
                    let xv = Vec7::from_column_slice(&cells[k].x);
                    p += xv * xv.transpose();
                }
                cholesky_with_jitter(p, || format!("beta precision of dyad {}->{}", slot / n, slot % n)).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler {
            data,
            n,
            rank,
            games,
            cells,
            dyad_cells,
            dyad_precision,
            carrier_cells,
            receiver_cells,
        })
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn games(&self) -> &[GameId] {
        &self.games
    }

    pub fn dataset(&self) -> &Dataset<T> {
        self.data
    }

    /// Dyads with at least one cell, ordered by (sender, receiver).
    pub fn active_dyads(&self) -> Vec<Dyad> {
        (0..self.n * self.n)
            .filter(|&s| !self.dyad_cells[s].is_empty())
            .map(|s| Dyad::new((s / self.n) as u32, (s % self.n) as u32))
            .collect()
    }

    fn slot(&self, dyad: Dyad) -> Result<usize> {
        let (i, j) = (dyad.sender.index(), dyad.receiver.index());
        if i >= self.n || j >= self.n || i == j {
            return Err(Error::InvalidInput(format!("dyad {dyad} is not a pair of distinct registered players")));
        }
        Ok(i * self.n + j)
    }

    #[inline]
    fn affinity(&self, state: &ChainState<T>, c: &Cell<T>) -> T {
        if self.rank == 0 {
            return T::zero();
        }
        let f = &state.factors[c.game];
        (0..self.rank).fold(T::zero(), |acc, r| acc + f.u[(c.sender, r)] * f.v[(c.receiver, r)])
    }

    fn linear_terms(&self, state: &ChainState<T>) -> Vec<T> {
        self.cells.iter().map(|c| dot(&c.x, &state.beta[c.dyad])).collect()
    }

    /// Conditional mean `x·β + u·v` of every cell.
    pub fn conditional_means(&self, state: &ChainState<T>) -> Vec<T> {
        self.cells
            .iter()
            .map(|c| dot(&c.x, &state.beta[c.dyad]) + self.affinity(state, c))
            .collect()
    }

    /// State with `β`, `U`, `V` drawn from their priors and the lattice at
    /// its conditional mean.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainState<T>> {
        let mut beta = vec![[T::zero(); N_COVARIATES]; self.n * self.n];
        for (slot, b) in beta.iter_mut().enumerate() {
            if slot / self.n != slot % self.n {
                for v in b.iter_mut() {
                    *v = std_normal(rng);
                }
            }
        }
        let factors = self
            .games
            .iter()
            .map(|&g| {
                let mut f = LatentFactorSet::zeros(g, self.n, self.rank);
                for v in f.u.iter_mut().chain(f.v.iter_mut()) {
                    *v = std_normal(rng);
                }
                f
            })
            .collect();
        let mut state = ChainState {
            n_players: self.n,
            beta,
            factors,
            lattice: HazardLattice::from_covariates(&self.data.covariates, |_| T::zero())?,
            iteration: 0,
            mh_accepted: 0,
            mh_proposed: 0,
        };
        let means = self.conditional_means(&state);
        state.lattice.values_mut().copy_from_slice(&means);
        Ok(state)
    }

    fn beta_draw_slot<R: Rng + ?Sized>(&self, state: &ChainState<T>, slot: usize, rng: &mut R) -> Result<[T; N_COVARIATES]> {
        let Some(precision) = &self.dyad_precision[slot] else {
            let mut b = [T::zero(); N_COVARIATES];
            for v in b.iter_mut() {
                *v = std_normal(rng);
            }
            return Ok(b);
        };
        let lattice = state.lattice.values();
        let mut b = Vec7::<T>::zeros();
        for &k in &self.dyad_cells[slot] {
            let c = &self.cells[k];
            let r = lattice[k] - self.affinity(state, c);
            if !r.is_finite() {
                return Err(Error::NonFinite(format!(
                    "residual of cell {:?} while drawing beta",
                    self.data.covariates[k].key()
                )));
            }
            for d in 0..N_COVARIATES {
                b[d] += c.x[d] * r;
            }
        }
        let draw = draw_gaussian(precision, &b, rng);
        let mut out = [T::zero(); N_COVARIATES];
        out.copy_from_slice(draw.as_slice());
        Ok(out)
    }

    /// Step 1 for one dyad: a draw from `p(β_ij | Θ, U, V)`.
    pub fn sample_beta<R: Rng + ?Sized>(&self, state: &ChainState<T>, dyad: Dyad, rng: &mut R) -> Result<DyadCoefficients<T>> {
        let slot = self.slot(dyad)?;
        self.beta_draw_slot(state, slot, rng).map(DyadCoefficients::from_vector)
    }

    fn column_draw<R: Rng + ?Sized>(
        &self,
        state: &ChainState<T>,
        xb: &[T],
        game: usize,
        side: Side,
        r: usize,
        rng: &mut R,
    ) -> Result<Vec<T>> {
        let f = &state.factors[game];
        let lattice = state.lattice.values();
        let index = match side {
            Side::Sender => &self.carrier_cells[game],
            Side::Receiver => &self.receiver_cells[game],
        };
        let mut column = Vec::with_capacity(self.n);
        for cells in index.iter() {
            let mut precision = T::one();
            let mut b = T::zero();
            for &k in cells {
                let c = &self.cells[k];
                let (own, other) = match side {
                    Side::Sender => (&f.u, &f.v),
                    Side::Receiver => (&f.v, &f.u),
                };
                let (me, them) = match side {
                    Side::Sender => (c.sender, c.receiver),
                    Side::Receiver => (c.receiver, c.sender),
                };
                let mut rest = T::zero();
                for q in (0..self.rank).filter(|&q| q != r) {
                    rest += own[(me, q)] * other[(them, q)];
                }
                let resid = lattice[k] - xb[k] - rest;
                if !resid.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "residual of cell {:?} while drawing latent factors",
                        self.data.covariates[k].key()
                    )));
                }
                let w = other[(them, r)];
                precision += w * w;
                b += w * resid;
            }
            let z: T = std_normal(rng);
            column.push(b / precision + z / precision.sqrt());
        }
        Ok(column)
    }

    /// Step 2 for one column: a draw of `U_g[, r]` (sender side) or
    /// `V_g[, r]` (receiver side) from its full conditional. Players are
    /// conditionally independent, so this is `n` scalar normal draws.
    pub fn sample_latent_column<R: Rng + ?Sized>(
        &self,
        state: &ChainState<T>,
        game: GameId,
        side: Side,
        r: usize,
        rng: &mut R,
    ) -> Result<Vec<T>> {
        if r >= self.rank {
            return Err(Error::InvalidInput(format!("latent column {r} out of range 0..{}", self.rank)));
        }
        let g = self
            .games
            .binary_search(&game)
            .map_err(|_| Error::InvalidInput(format!("game {game} not in the data")))?;
        let xb = self.linear_terms(state);
        self.column_draw(state, &xb, g, side, r, rng)
    }

    fn mh_sweep<R: Rng + ?Sized>(&self, state: &mut ChainState<T>, xb: &[T], rng: &mut R) {
        let mut accepted = 0u64;
        for (k, c) in self.cells.iter().enumerate() {
            let mean = xb[k] + self.affinity(state, c);
            let proposal = mean + std_normal::<T, R>(rng);
            let current = state.lattice.values()[k];
            let log_ratio =
                interval_loglik_unchecked(c.event, proposal, c.dt) - interval_loglik_unchecked(c.event, current, c.dt);
            let u: f64 = rng.random();
            if log_ratio >= T::zero() || T::lit(u.ln()) < log_ratio {
                state.lattice.values_mut()[k] = proposal;
                accepted += 1;
            }
        }
        state.mh_accepted += accepted;
        state.mh_proposed += self.cells.len() as u64;
    }

    /// Step 3: one independence-Metropolis update of every lattice cell.
    pub fn mh_update_lattice<R: Rng + ?Sized>(&self, state: &mut ChainState<T>, rng: &mut R) {
        let xb = self.linear_terms(state);
        self.mh_sweep(state, &xb, rng);
    }

    /// One full sweep (steps 1 → 2 → 3) in place.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState<T>, rng: &mut R) -> Result<()> {
        for slot in 0..self.n * self.n {
            if slot / self.n == slot % self.n {
                continue;
            }
            state.beta[slot] = self.beta_draw_slot(state, slot, rng)?;
        }
        let xb = self.linear_terms(state);
        for g in 0..self.games.len() {
            for r in 0..self.rank {
                let u = self.column_draw(state, &xb, g, Side::Sender, r, rng)?;
                state.factors[g].u.set_column(r, &nalgebra::DVector::from_vec(u));
                let v = self.column_draw(state, &xb, g, Side::Receiver, r, rng)?;
                state.factors[g].v.set_column(r, &nalgebra::DVector::from_vec(v));
            }
        }
        self.mh_sweep(state, &xb, rng);
        state.iteration += 1;
        self.check_finite(state)
    }

    fn check_finite(&self, state: &ChainState<T>) -> Result<()> {
        let it = state.iteration;
        let diverged = |parameter: String| Error::Divergence { iteration: it, parameter };
        for (slot, b) in state.beta.iter().enumerate() {
            if let Some(k) = b.iter().position(|v| !v.is_finite()) {
                return Err(diverged(format!("beta/{}/{}/{k}", slot / self.n, slot % self.n)));
            }
        }
        for f in &state.factors {
            for (name, m) in [("U", &f.u), ("V", &f.v)] {
                if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                    // column-major storage
                    let (i, r) = (pos % m.nrows(), pos / m.nrows());
                    return Err(diverged(format!("{name}/{}/{i}/{r}", f.game)));
                }
            }
        }
        if let Some(k) = state.lattice.values().iter().position(|v| !v.is_finite()) {
            return Err(diverged(format!("lattice cell {:?}", state.lattice.keys()[k])));
        }
        Ok(())
    }
}

/// `min(1, p(y | θ*) / p(y | θ))` for one cell, computed in log space.
pub fn mh_acceptance_probability<T: Real>(event: bool, current: T, proposal: T, interval_length: T) -> T {
    let log_ratio = interval_loglik_unchecked(event, proposal, interval_length)
        - interval_loglik_unchecked(event, current, interval_length);
    if log_ratio >= T::zero() {
        T::one()
    } else {
        log_ratio.exp()
    }
}

/// Free-function form of [`Sampler::sample_beta`].
pub fn sample_beta<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    state: &ChainState<T>,
    dyad: Dyad,
    rng: &mut R,
) -> Result<DyadCoefficients<T>> {
    let rank = state.factors.first().map_or(0, |f| f.rank());
    Sampler::new(data, rank)?.sample_beta(state, dyad, rng)
}

/// Free-function form of [`Sampler::sample_latent_column`].
pub fn sample_latent_column<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    state: &ChainState<T>,
    game: GameId,
    side: Side,
    r: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let rank = state.factors.first().map_or(0, |f| f.rank());
    Sampler::new(data, rank)?.sample_latent_column(state, game, side, r, rng)
}

/// Free-function form of [`Sampler::mh_update_lattice`]; returns the new lattice.
pub fn mh_update_lattice<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    state: &mut ChainState<T>,
    rng: &mut R,
) -> Result<HazardLattice<T>> {
    let rank = state.factors.first().map_or(0, |f| f.rank());
    Sampler::new(data, rank)?.mh_update_lattice(state, rng);
    Ok(state.lattice.clone())
}

impl<T: Real> ChainState<T> {
    /// A state with explicit values, for driving single conditional draws.
    pub fn from_parts(
        data: &Dataset<T>,
        beta: Vec<[T; N_COVARIATES]>,
        factors: Vec<LatentFactorSet<T>>,
        log_hazards: Vec<T>,
    ) -> Result<Self> {
        let n = data.n_players;
        if beta.len() != n * n {
            return Err(Error::Dimension(format!("{} beta slots for {n} players", beta.len())));
        }
        let games = data.games();
        if !factors.is_empty() {
            if factors.len() != games.len() || factors.iter().zip(&games).any(|(f, g)| f.game != *g) {
                return Err(Error::Consistency("factor sets must match the data's games in order".into()));
            }
            if factors.iter().any(|f| f.n_players() != n || f.rank() != factors[0].rank()) {
                return Err(Error::Dimension("factor sets have inconsistent shapes".into()));
            }
        }
        let keys = data.covariates.iter().map(|c| c.key()).collect();
        Ok(ChainState {
            n_players: n,
            beta,
            factors,
            lattice: HazardLattice::new(keys, log_hazards)?,
            iteration: 0,
            mh_accepted: 0,
            mh_proposed: 0,
        })
    }
}
