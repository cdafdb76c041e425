//! Text forms of chain output.
//!
//! Samples are long-format rows `iteration  parameter  value` under a short
//! `#` header; parameter paths are `beta/<i>/<j>/<k>`, `U/<game>/<i>/<r>` and
//! `V/<game>/<j>/<r>`. The summary is a flat `key  value` table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::chain::{ChainOutput, Draw};
use super::summary::{FactorErrorTrace, PosteriorSummary};
use super::ModelKind;
use crate::error::{Error, Result};
use crate::model::{Dyad, GameId, LatentFactorSet, N_COVARIATES};
use crate::num::Real;

const SAMPLES_MAGIC: &str = "# passnet-samples v1";
const SAMPLES_COLUMNS: &str = "iteration\tparameter\tvalue";

pub fn samples_to_text<T: Real>(output: &ChainOutput<T>) -> String {
    let mut out = String::new();
    let games: Vec<String> = output.games.iter().map(|g| g.to_string()).collect();
    let _ = writeln!(out, "{SAMPLES_MAGIC}");
    let _ = writeln!(out, "# model\t{}", output.model.as_str());
    let _ = writeln!(out, "# players\t{}", output.n_players);
    let _ = writeln!(out, "# rank\t{}", output.rank);
    let _ = writeln!(out, "# games\t{}", games.join(","));
    let _ = writeln!(out, "# mh\t{}\t{}", output.mh_accepted, output.mh_proposed);
    let _ = writeln!(out, "{SAMPLES_COLUMNS}");
    for d in &output.draws {
        let it = d.iteration;
        for (dyad, b) in output.active_dyads.iter().zip(&d.beta) {
            for (k, v) in b.iter().enumerate() {
                let _ = writeln!(out, "{it}\tbeta/{}/{}/{k}\t{v}", dyad.sender, dyad.receiver);
            }
        }
        for f in &d.factors {
            for (name, m) in [("U", &f.u), ("V", &f.v)] {
                for i in 0..m.nrows() {
                    for r in 0..m.ncols() {
                        let _ = writeln!(out, "{it}\t{name}/{}/{i}/{r}\t{}", f.game, m[(i, r)]);
                    }
                }
            }
        }
    }
    out
}

enum Path {
    Beta(Dyad, usize),
    Factor { v: bool, game: GameId, row: usize, r: usize },
}

fn parse_path(s: &str) -> Option<Path> {
    let parts: Vec<&str> = s.split('/').collect();
    let [head, a, b, c] = parts.as_slice() else {
        return None;
    };
    let (a, b, c): (u32, u32, usize) = (a.parse().ok()?, b.parse().ok()?, c.parse().ok()?);
    match *head {
        "beta" if c < N_COVARIATES && a != b => Some(Path::Beta(Dyad::new(a, b), c)),
        "U" | "V" => Some(Path::Factor {
            v: *head == "V",
            game: GameId(a),
            row: b as usize,
            r: c,
        }),
        _ => None,
    }
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, &'a str)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("samples end before header `{key}`")))?;
    line.strip_prefix(&format!("# {key}\t"))
        .map(|v| (no, v))
        .ok_or_else(|| Error::parse(no, format!("expected header `{key}`")))
}

pub fn parse_samples<T: Real>(text: &str) -> Result<ChainOutput<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, SAMPLES_MAGIC)) => {}
        Some((no, other)) => {
            return Err(Error::Schema(format!("line {no}: expected `{SAMPLES_MAGIC}`, found `{other}`")));
        }
        None => return Err(Error::Schema("empty samples file".into())),
    }
    let (no, model) = header(&mut lines, "model")?;
    let model: ModelKind = model.parse().map_err(|_| Error::parse(no, "unknown model"))?;
    let (no, n) = header(&mut lines, "players")?;
    let n_players: usize = n.parse().map_err(|_| Error::parse(no, "bad player count"))?;
    let (no, rank) = header(&mut lines, "rank")?;
    let rank: usize = rank.parse().map_err(|_| Error::parse(no, "bad rank"))?;
    let (no, games) = header(&mut lines, "games")?;
    let games: Vec<GameId> = if games.is_empty() {
        Vec::new()
    } else {
        games
            .split(',')
            .map(|g| g.parse().map(GameId))
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(no, "bad game list"))?
    };
    let (no, mh) = header(&mut lines, "mh")?;
    let (acc, prop) = mh.split_once('\t').ok_or_else(|| Error::parse(no, "bad MH counts"))?;
    let mh_accepted: u64 = acc.parse().map_err(|_| Error::parse(no, "bad MH counts"))?;
    let mh_proposed: u64 = prop.parse().map_err(|_| Error::parse(no, "bad MH counts"))?;
    match lines.next() {
        Some((_, SAMPLES_COLUMNS)) => {}
        Some((no, _)) => return Err(Error::parse(no, format!("expected column header `{SAMPLES_COLUMNS}`"))),
        None => return Err(Error::parse(0, "missing column header")),
    }

    let mut dyad_order: Vec<Dyad> = Vec::new();
    let mut dyad_pos: BTreeMap<Dyad, usize> = BTreeMap::new();
    let mut raw: BTreeMap<usize, (BTreeMap<Dyad, [Option<T>; N_COVARIATES]>, Vec<LatentFactorSet<T>>)> = BTreeMap::new();
    for (no, line) in lines {
        let mut it = line.split('\t');
        let (Some(iter), Some(path), Some(value), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(Error::parse(no, "expected three tab-separated columns"));
        };
        let iteration: usize = iter.parse().map_err(|_| Error::parse(no, "bad iteration"))?;
        let value: T = value.parse().map_err(|_| Error::parse(no, "bad value"))?;
        let entry = raw.entry(iteration).or_insert_with(|| {
            let factors = if model == ModelKind::Latent {
                games.iter().map(|&g| LatentFactorSet::zeros(g, n_players, rank)).collect()
            } else {
                Vec::new()
            };
            (BTreeMap::new(), factors)
        });
        match parse_path(path).ok_or_else(|| Error::parse(no, format!("bad parameter path `{path}`")))? {
            Path::Beta(dyad, k) => {
                if dyad.sender.index() >= n_players || dyad.receiver.index() >= n_players {
                    return Err(Error::parse(no, format!("dyad {dyad} outside {n_players} players")));
                }
                if let std::collections::btree_map::Entry::Vacant(e) = dyad_pos.entry(dyad) {
                    e.insert(dyad_order.len());
                    dyad_order.push(dyad);
                }
                entry.0.entry(dyad).or_insert([None; N_COVARIATES])[k] = Some(value);
            }
            Path::Factor { v, game, row, r } => {
                let gi = games
                    .binary_search(&game)
                    .map_err(|_| Error::parse(no, format!("game {game} not in header")))?;
                if row >= n_players || r >= rank || entry.1.is_empty() {
                    return Err(Error::parse(no, format!("factor path `{path}` out of range")));
                }
                let f = &mut entry.1[gi];
                if v {
                    f.v[(row, r)] = value;
                } else {
                    f.u[(row, r)] = value;
                }
            }
        }
    }
    let mut draws = Vec::with_capacity(raw.len());
    for (iteration, (betas, factors)) in raw {
        let mut beta = Vec::with_capacity(dyad_order.len());
        for d in &dyad_order {
            let b = betas
                .get(d)
                .ok_or_else(|| Error::Consistency(format!("iteration {iteration} lacks beta for {d}")))?;
            let mut out = [T::zero(); N_COVARIATES];
            for (k, v) in b.iter().enumerate() {
                out[k] = v.ok_or_else(|| Error::Consistency(format!("iteration {iteration} lacks beta/{}/{}/{k}", d.sender, d.receiver)))?;
            }
            beta.push(out);
        }
        draws.push(Draw {
            iteration,
            beta,
            factors,
        });
    }
    Ok(ChainOutput {
        n_players,
        rank,
        model,
        games,
        active_dyads: dyad_order,
        draws,
        factor_trace: Vec::new(),
        mh_accepted,
        mh_proposed,
    })
}

/// Flat `key\tvalue` table: draw count, acceptance rate, then
/// `<path>/{mean,sd,lower,upper}` for every parameter.
pub fn summary_to_text<T: Real>(summary: &PosteriorSummary<T>) -> String {
    let mut out = String::from("key\tvalue\n");
    let _ = writeln!(out, "n_draws\t{}", summary.n_draws);
    let _ = writeln!(out, "acceptance_rate\t{}", summary.acceptance_rate);
    for p in &summary.parameters {
        let _ = writeln!(out, "{}/mean\t{}", p.path, p.mean);
        let _ = writeln!(out, "{}/sd\t{}", p.path, p.sd);
        let _ = writeln!(out, "{}/lower\t{}", p.path, p.lower);
        let _ = writeln!(out, "{}/upper\t{}", p.path, p.upper);
    }
    out
}

/// Reads a flat key-value table back into a map.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    if lines.next().map(|(_, l)| l) != Some("key\tvalue") {
        return Err(Error::Schema("expected a `key\\tvalue` table".into()));
    }
    let mut map = BTreeMap::new();
    for (no, line) in lines {
        let (k, v) = line.split_once('\t').ok_or_else(|| Error::parse(no, "expected two columns"))?;
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::parse(no, format!("duplicate key `{k}`")));
        }
    }
    Ok(map)
}

pub fn error_trace_to_text(trace: &FactorErrorTrace) -> String {
    let mut out = String::from("iteration\tuv_mse\tu_sq_error\tv_sq_error\n");
    for i in 0..trace.iteration.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            trace.iteration[i], trace.uv_mse[i], trace.u_sq_error[i], trace.v_sq_error[i]
        );
    }
    out
}

/// Posterior-mean factors as long rows `player  role  dim1 .. dimR`.
pub fn factors_to_text<T: Real>(f: &LatentFactorSet<T>) -> String {
    let mut out = String::from("player_id\trole");
    for r in 0..f.rank() {
        let _ = write!(out, "\tdim{}", r + 1);
    }
    out.push('\n');
    for (role, m) in [("sender", &f.u), ("receiver", &f.v)] {
        for i in 0..m.nrows() {
            let _ = write!(out, "{i}\t{role}");
            for r in 0..m.ncols() {
                let _ = write!(out, "\t{}", m[(i, r)]);
            }
            out.push('\n');
        }
    }
    out
}

/// Per-game posterior-mean `U`, `V` computed from raw draws.
pub fn posterior_mean_factors<T: Real>(output: &ChainOutput<T>, game: GameId) -> Result<LatentFactorSet<T>> {
    let gi = output
        .games
        .binary_search(&game)
        .map_err(|_| Error::InvalidInput(format!("game {game} not in the samples")))?;
    if output.model != ModelKind::Latent || output.draws.is_empty() {
        return Err(Error::InvalidInput("samples carry no latent factors".into()));
    }
    let (n, r) = (output.n_players, output.rank);
    let (mut u, mut v) = (DMatrix::zeros(n, r), DMatrix::zeros(n, r));
    for d in &output.draws {
        u += &d.factors[gi].u;
        v += &d.factors[gi].v;
    }
    let scale = T::one() / T::from_count(output.draws.len());
    LatentFactorSet::new(game, u * scale, v * scale)
}
