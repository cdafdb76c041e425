use nalgebra::DMatrix;

use super::chain::ChainOutput;
use crate::error::{Error, Result};
use crate::model::{LatentFactorSet, ModelParameters};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    /// `beta/<i>/<j>/<k>`, `U/<game>/<i>/<r>` or `V/<game>/<j>/<r>`.
    pub path: String,
    pub mean: f64,
    pub sd: f64,
    /// 2.5% sample quantile.
    pub lower: f64,
    /// 97.5% sample quantile.
    pub upper: f64,
}

/// Per-sweep distances between sampled and true latent factors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorErrorTrace {
    pub iteration: Vec<usize>,
    /// Mean squared error of off-diagonal `U Vᵀ` entries, averaged over games.
    pub uv_mse: Vec<f64>,
    /// Mean squared error of `U` entries after Procrustes alignment.
    pub u_sq_error: Vec<f64>,
    pub v_sq_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary<T: Real = f64> {
    pub n_draws: usize,
    pub parameters: Vec<ParameterSummary>,
    /// Posterior-mean factors per game (raw, not aligned).
    pub factor_means: Vec<LatentFactorSet<T>>,
    pub acceptance_rate: f64,
    pub error_trace: Option<FactorErrorTrace>,
}

impl<T: Real> PosteriorSummary<T> {
    pub fn get(&self, path: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.path == path)
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn describe(path: String, values: &mut [f64]) -> ParameterSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    values.sort_by(f64::total_cmp);
    ParameterSummary {
        path,
        mean,
        sd: var.sqrt(),
        lower: quantile(values, 0.025),
        upper: quantile(values, 0.975),
    }
}

/// Orthogonal `Q` minimizing `‖A Q − B‖_F`.
pub fn procrustes_rotation<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("Procrustes shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let svd = (a.transpose() * b).svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::Singular("Procrustes SVD did not converge".into()));
    };
    Ok(u * vt)
}

fn mse<T: Real>(values: impl Iterator<Item = (T, T)>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (a, b) in values {
        let d = (a - b).as_f64();
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn factor_errors<T: Real>(sample: &[LatentFactorSet<T>], truth: &[LatentFactorSet<T>]) -> Result<(f64, f64, f64)> {
    let (mut uv, mut u, mut v) = (0.0, 0.0, 0.0);
    for s in sample {
        let t = truth
            .iter()
            .find(|t| t.game == s.game)
            .ok_or_else(|| Error::Consistency(format!("no true factors for game {}", s.game)))?;
        if t.u.shape() != s.u.shape() {
            return Err(Error::Dimension(format!(
                "true factors of game {} are {:?}, samples {:?}",
                s.game,
                t.u.shape(),
                s.u.shape()
            )));
        }
        let n = s.n_players();
        let (ms, mt) = (s.inner_products(), t.inner_products());
        uv += mse((0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| (ms[(i, j)], mt[(i, j)])));
        let stacked = |f: &LatentFactorSet<T>| {
            let mut m = DMatrix::zeros(2 * n, f.rank());
            m.rows_mut(0, n).copy_from(&f.u);
            m.rows_mut(n, n).copy_from(&f.v);
            m
        };
        let q = procrustes_rotation(&stacked(s), &stacked(t))?;
        let (ua, va) = (&s.u * &q, &s.v * &q);
        u += mse(ua.iter().copied().zip(t.u.iter().copied()));
        v += mse(va.iter().copied().zip(t.v.iter().copied()));
    }
    let g = sample.len().max(1) as f64;
    Ok((uv / g, u / g, v / g))
}

/// Moments, central 95% intervals and acceptance rate of a chain; with
/// `truth`, also the per-sweep factor error traces.
pub fn summarize<T: Real>(output: &ChainOutput<T>, truth: Option<&[LatentFactorSet<T>]>) -> Result<PosteriorSummary<T>> {
    let draws = &output.draws;
    if draws.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "summaries need at least 2 retained draws, got {}",
            draws.len()
        )));
    }
    let mut parameters = Vec::new();
    let mut column = vec![0.0; draws.len()];
    for (a, dyad) in output.active_dyads.iter().enumerate() {
        for k in 0..crate::model::N_COVARIATES {
            for (c, d) in column.iter_mut().zip(draws) {
                *c = d.beta[a][k].as_f64();
            }
            parameters.push(describe(format!("beta/{}/{}/{k}", dyad.sender, dyad.receiver), &mut column));
        }
    }
    let mut factor_means = Vec::new();
    for (gi, &game) in output.games.iter().enumerate() {
        if output.rank == 0 {
            break;
        }
        let mut mean = LatentFactorSet::zeros(game, output.n_players, output.rank);
        let scale = T::one() / T::from_count(draws.len());
        for d in draws {
            mean.u += &d.factors[gi].u * scale;
            mean.v += &d.factors[gi].v * scale;
        }
        for (name, pick) in [("U", 0usize), ("V", 1)] {
            for i in 0..output.n_players {
                for r in 0..output.rank {
                    for (c, d) in column.iter_mut().zip(draws) {
                        let f = &d.factors[gi];
                        *c = if pick == 0 { f.u[(i, r)] } else { f.v[(i, r)] }.as_f64();
                    }
                    parameters.push(describe(format!("{name}/{game}/{i}/{r}"), &mut column));
                }
            }
        }
        factor_means.push(mean);
    }
    let error_trace = match truth {
        Some(truth) if output.rank > 0 => {
            let mut trace = FactorErrorTrace::default();
            for (it, factors) in output.factor_trace.iter().enumerate() {
                let (uv, u, v) = factor_errors(factors, truth)?;
                trace.iteration.push(it + 1);
                trace.uv_mse.push(uv);
                trace.u_sq_error.push(u);
                trace.v_sq_error.push(v);
            }
            Some(trace)
        }
        _ => None,
    };
    Ok(PosteriorSummary {
        n_draws: draws.len(),
        parameters,
        factor_means,
        acceptance_rate: output.acceptance_rate(),
        error_trace,
    })
}

/// For each reported dyad, whether the 95% interval of `beta/i/j/<coordinate>`
/// contains the true value.
pub fn interval_coverage<T: Real>(summary: &PosteriorSummary<T>, truth: &ModelParameters<T>, coordinate: usize) -> Vec<bool> {
    summary
        .parameters
        .iter()
        .filter_map(|p| {
            let mut parts = p.path.split('/');
            if parts.next() != Some("beta") {
                return None;
            }
            let i: usize = parts.next()?.parse().ok()?;
            let j: usize = parts.next()?.parse().ok()?;
            let k: usize = parts.next()?.parse().ok()?;
            if k != coordinate {
                return None;
            }
            let t = truth.beta[i * truth.n_players + j][k].as_f64();
            Some(p.lower <= t && t <= p.upper)
        })
        .collect()
}
