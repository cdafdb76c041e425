use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ChainConfig, ModelKind, Sampler};
use crate::error::Result;
use crate::model::{Dataset, Dyad, GameId, LatentFactorSet, ModelParameters, N_COVARIATES};
use crate::num::Real;

/// One retained state.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw<T: Real = f64> {
    pub iteration: usize,
    /// Aligned with [`ChainOutput::active_dyads`].
    pub beta: Vec<[T; N_COVARIATES]>,
    /// One per game, ascending; empty for the covariates-only model.
    pub factors: Vec<LatentFactorSet<T>>,
}

/// Retained draws plus the bookkeeping needed to summarize them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput<T: Real = f64> {
    pub n_players: usize,
    pub rank: usize,
    pub model: ModelKind,
    pub games: Vec<GameId>,
    /// Dyads with observation time; others keep prior draws and are not reported.
    pub active_dyads: Vec<Dyad>,
    pub draws: Vec<Draw<T>>,
    /// Factors after every sweep including burn-in (latent model only).
    pub factor_trace: Vec<Vec<LatentFactorSet<T>>>,
    pub mh_accepted: u64,
    pub mh_proposed: u64,
}

impl<T: Real> ChainOutput<T> {
    pub fn acceptance_rate(&self) -> f64 {
        if self.mh_proposed == 0 {
            0.0
        } else {
            self.mh_accepted as f64 / self.mh_proposed as f64
        }
    }

    /// Parameters of one draw; inactive dyads get zero coefficients.
    pub fn draw_parameters(&self, draw: &Draw<T>) -> Result<ModelParameters<T>> {
        let n = self.n_players;
        let mut beta = vec![[T::zero(); N_COVARIATES]; n * n];
        for (d, b) in self.active_dyads.iter().zip(&draw.beta) {
            beta[d.sender.index() * n + d.receiver.index()] = *b;
        }
        ModelParameters::from_factors(beta, &draw.factors)
    }

    /// Posterior-mean `β` and posterior-mean `U Vᵀ` per game.
    pub fn posterior_mean_parameters(&self) -> Result<ModelParameters<T>> {
        let n = self.n_players;
        let mut mean = ModelParameters::zeros(n);
        if self.draws.is_empty() {
            return Ok(mean);
        }
        let scale = T::one() / T::from_count(self.draws.len());
        for draw in &self.draws {
            let p = self.draw_parameters(draw)?;
            for (acc, b) in mean.beta.iter_mut().zip(&p.beta) {
                for k in 0..N_COVARIATES {
                    acc[k] += b[k] * scale;
                }
            }
            for (g, m) in p.affinity {
                let entry = mean.affinity.entry(g).or_insert_with(|| nalgebra::DMatrix::zeros(n, n));
                *entry += m * scale;
            }
        }
        Ok(mean)
    }
}

const CHAIN_STREAM: u64 = 1;

/// Runs one chain. Deterministic given `config.seed`.
pub fn run_chain<T: Real>(config: &ChainConfig, data: &Dataset<T>) -> Result<ChainOutput<T>> {
    config.validate()?;
    let rank = config.effective_rank();
    let sampler = Sampler::new(data, rank)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // The generator draws its truth from stream 0 of the same seed, in the
    // same order as the initial state; a separate stream keeps a chain from
    // starting at the truth when the two seeds coincide.
    rng.set_stream(CHAIN_STREAM);
    let mut state = sampler.initial_state(&mut rng)?;
    let active_dyads = sampler.active_dyads();
    let n = sampler.n_players();
    let slots: Vec<usize> = active_dyads
        .iter()
        .map(|d| d.sender.index() * n + d.receiver.index())
        .collect();
    let mut draws = Vec::with_capacity(config.n_retained());
    let mut factor_trace = Vec::new();
    for it in 1..=config.iterations {
        sampler.sweep(&mut state, &mut rng)?;
        if config.model == ModelKind::Latent {
            factor_trace.push(state.factors.clone());
        }
        if config.is_retained(it) {
            draws.push(Draw {
                iteration: it,
                beta: slots.iter().map(|&s| state.beta[s]).collect(),
                factors: if config.model == ModelKind::Latent {
                    state.factors.clone()
                } else {
                    Vec::new()
                },
            });
        }
        if it % 500 == 0 {
            log::debug!(
                "iteration {it}/{}: MH acceptance {:.3}",
                config.iterations,
                state.acceptance_rate()
            );
        }
    }
    Ok(ChainOutput {
        n_players: n,
        rank,
        model: config.model,
        games: sampler.games().to_vec(),
        active_dyads,
        draws,
        factor_trace,
        mh_accepted: state.mh_accepted,
        mh_proposed: state.mh_proposed,
    })
}
