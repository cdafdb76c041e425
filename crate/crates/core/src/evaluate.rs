//! Training and held-out log-likelihood of fitted chains.
//!
//! Parameters are plugged in at the conditional mean of the lattice,
//! `log θ = x·β + u·v` (the residual `ε` set to its mean 0). Dyads never seen
//! in training contribute `β = 0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{sequence_loglik, Dataset, ModelParameters};
use crate::num::Real;
use crate::sampler::ChainOutput;

/// Log-likelihood at fixed parameters.
pub fn plug_in_loglik<T: Real>(params: &ModelParameters<T>, data: &Dataset<T>) -> Result<T> {
    if data.covariates.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate a log-likelihood on an empty split".into()));
    }
    sequence_loglik(&data.events, &params.mean_lattice(data)?, &data.covariates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikReport {
    /// At the posterior-mean parameters.
    pub posterior_mean: f64,
    /// Mean and SD over retained draws.
    pub draw_mean: f64,
    pub draw_sd: f64,
    pub n_draws: usize,
    pub n_cells: usize,
}

impl fmt::Display for LoglikReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.draw_mean, self.draw_sd)
    }
}

pub fn evaluate_chain<T: Real>(output: &ChainOutput<T>, data: &Dataset<T>) -> Result<LoglikReport> {
    if output.draws.is_empty() {
        return Err(Error::InvalidInput("no retained draws to evaluate".into()));
    }
    if data.n_players > output.n_players {
        return Err(Error::Consistency(format!(
            "data has {} players but the chain was fitted on {}",
            data.n_players, output.n_players
        )));
    }
    let posterior_mean = plug_in_loglik(&output.posterior_mean_parameters()?, data)?.as_f64();
    let per_draw = output
        .draws
        .iter()
        .map(|d| plug_in_loglik(&output.draw_parameters(d)?, data).map(|v| v.as_f64()))
        .collect::<Result<Vec<f64>>>()?;
    let n = per_draw.len() as f64;
    let draw_mean = per_draw.iter().sum::<f64>() / n;
    let draw_sd = if per_draw.len() > 1 {
        (per_draw.iter().map(|v| (v - draw_mean) * (v - draw_mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(LoglikReport {
        posterior_mean,
        draw_mean,
        draw_sd,
        n_draws: per_draw.len(),
        n_cells: data.covariates.len(),
    })
}
