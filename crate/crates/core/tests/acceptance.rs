//! Acceptance criteria 1-8, one PASS/FAIL line each. Runs as a plain binary
//! (no libtest harness) so every criterion reports even when another fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use passnet_core::evaluate::evaluate_chain;
use passnet_core::ingest::markup::{self, MarkupDialect};
use passnet_core::ingest::{
    boxscore_to_text, build_dataset, merge_streams, parse_boxscore, parse_playbyplay, parse_tracking,
    playbyplay_to_text, segment_possessions, tracking_to_text, CovariateOptions,
};
use passnet_core::model::{
    sequence_loglik, CovariateRecord, Dataset, Dyad, GameId, HazardLattice, LatentFactorSet, PassEvent, PlayerId,
    PositionClass, PossessionId,
};
use passnet_core::sampler::{interval_coverage, run_chain, summarize, ChainConfig, ChainState, ModelKind, Sampler, Side};
use passnet_core::spatial::court::tile_centers;
use passnet_core::spatial::{
    default_lambda_grid, fit_field, gcv_select, select_knots, tile_counts, tps_kernel, CourtLocation, FieldKind,
    FieldStore, FieldTable, LambdaChoice, LocatedPass, SpatialField, TileGrid, TpsProblem,
};
use passnet_core::synthetic::{generate, oracle_loglik, split_train_test, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = (bool, String);

// ---------------------------------------------------------------------------
// Criteria 1-3: ten seeded desk-scale datasets, both models.

struct SeedRun {
    seed: u64,
    heldout_latent: f64,
    heldout_covariates: f64,
    covered: Vec<bool>,
    uv_first: f64,
    uv_last: f64,
}

fn run_seed(seed: u64) -> SeedRun {
    let spec = SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    };
    let data = generate(&spec).unwrap();
    let (train, test) = split_train_test(&data.dataset, 0.9).unwrap();
    let config = |model| ChainConfig {
        iterations: 2000,
        burn_in: 500,
        thin: 4,
        rank: 2,
        seed,
        model,
    };
    let latent = run_chain(&config(ModelKind::Latent), &train).unwrap();
    let covariates = run_chain(&config(ModelKind::Covariates), &train).unwrap();
    let heldout_latent = evaluate_chain(&latent, &test).unwrap().draw_mean;
    let heldout_covariates = evaluate_chain(&covariates, &test).unwrap().draw_mean;

    let summary = summarize(&latent, Some(&data.truth.factors)).unwrap();
    let covered = interval_coverage(&summary, &data.truth.parameters().unwrap(), 0);
    let uv = summary.error_trace.unwrap().uv_mse;
    let tenth = uv.len() / 10;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    SeedRun {
        seed,
        heldout_latent,
        heldout_covariates,
        covered,
        uv_first: mean(&uv[..tenth]),
        uv_last: mean(&uv[uv.len() - tenth..]),
    }
}

fn criterion_1(runs: &[SeedRun]) -> Outcome {
    let wins = runs.iter().filter(|r| r.heldout_latent > r.heldout_covariates).count();
    let detail = runs
        .iter()
        .map(|r| format!("s{}:{:.0}/{:.0}", r.seed, r.heldout_latent, r.heldout_covariates))
        .collect::<Vec<_>>()
        .join(" ");
    (wins >= 8, format!("latent beats covariates held out in {wins}/10 seeds ({detail})"))
}

fn criterion_2(runs: &[SeedRun]) -> Outcome {
    let hits: usize = runs.iter().map(|r| r.covered.iter().filter(|&&c| c).count()).sum();
    let total: usize = runs.iter().map(|r| r.covered.len()).sum();
    let rate = hits as f64 / total as f64;
    (
        rate >= 0.85,
        format!("true beta_ij1 inside the 95% interval for {hits}/{total} = {:.1}% (need >= 85%)", 100.0 * rate),
    )
}

fn criterion_3(runs: &[SeedRun]) -> Outcome {
    let down = runs.iter().filter(|r| r.uv_last < r.uv_first).count();
    let detail = runs
        .iter()
        .map(|r| format!("s{}:{:.2}->{:.2}", r.seed, r.uv_first, r.uv_last))
        .collect::<Vec<_>>()
        .join(" ");
    (down >= 9, format!("UV' error falls from first to last tenth in {down}/10 seeds ({detail})"))
}

// ---------------------------------------------------------------------------
// Shared fixtures for the sampler criteria.

fn record(game: u32, interval: u32, sender: u32, receiver: u32, x: [f64; 7], dt: f64) -> CovariateRecord {
    CovariateRecord {
        game: GameId(game),
        interval_index: interval,
        sender: PlayerId(sender),
        receiver: PlayerId(receiver),
        w: [x[0], x[1], x[2], x[3], x[4]],
        xi_at_sender: x[5],
        xi_at_receiver: x[6],
        interval_length: dt,
    }
}

fn random_x(rng: &mut ChaCha8Rng, rank: u32) -> [f64; 7] {
    [
        1.0,
        if rng.random::<bool>() { 1.0 } else { 0.0 },
        rng.random_range(-1.0..2.0),
        rank as f64,
        rng.random_range(-1.5..1.5),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]
}

/// Random carriers with up to 4 receivers each and events with probability `p`.
fn random_dataset(rng: &mut ChaCha8Rng, n_players: u32, games: u32, intervals: u32, p: f64, dt: (f64, f64)) -> Dataset {
    let mut cov = Vec::new();
    let mut events = Vec::new();
    for g in 0..games {
        for t in 0..intervals {
            let sender = rng.random_range(0..n_players);
            let mut others: Vec<u32> = (0..n_players).filter(|&q| q != sender).collect();
            let keep = rng.random_range(1..=4usize.min(others.len()));
            while others.len() > keep {
                others.remove(rng.random_range(0..others.len()));
            }
            let len = rng.random_range(dt.0..=dt.1);
            for (k, &j) in others.iter().enumerate() {
                cov.push(record(g, t, sender, j, random_x(rng, k as u32 + 1), len));
            }
            if rng.random::<f64>() < p {
                events.push(PassEvent {
                    game: GameId(g),
                    possession: PossessionId(t / 25),
                    interval_index: t,
                    sender: PlayerId(sender),
                    receiver: PlayerId(others[rng.random_range(0..others.len())]),
                });
            }
        }
    }
    Dataset::new(n_players as usize, cov, events).unwrap()
}

fn random_state(data: &Dataset, rank: usize, rng: &mut ChaCha8Rng) -> ChainState {
    let n = data.n_players;
    let beta = (0..n * n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    let factors = data
        .games()
        .into_iter()
        .map(|g| {
            let u = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
            let v = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
            LatentFactorSet::new(g, u, v).unwrap()
        })
        .collect();
    let lattice = (0..data.covariates.len()).map(|_| rng.random_range(-3.0..1.0)).collect();
    ChainState::from_parts(data, beta, factors, lattice).unwrap()
}

/// Largest deviation of sample mean and variance from `N(mean, var)`, in
/// Monte Carlo standard errors.
fn moment_z(draws: &[f64], mean: f64, var: f64) -> f64 {
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let zm = (m - mean).abs() / (var / n).sqrt();
    let zv = (v - var).abs() / (var * (2.0 / (n - 1.0)).sqrt());
    zm.max(zv)
}

// ---------------------------------------------------------------------------
// Criterion 4: conjugate draws against analytic normal posteriors.

fn criterion_4() -> Outcome {
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    // beta: dense linear algebra on the stacked design of one dyad.
    let cov: Vec<_> = (0..200)
        .map(|t| {
            let rank = rng.random_range(1..=4);
            record(0, t, 0, 1, random_x(&mut rng, rank), 0.2)
        })
        .collect();
    let data = Dataset::new(2, cov, vec![]).unwrap();
    let state = random_state(&data, 2, &mut rng);
    let x = DMatrix::from_fn(200, 7, |t, k| data.covariates[t].x()[k]);
    let f = &state.factors[0];
    let uv: f64 = (0..2).map(|r| f.u[(0, r)] * f.v[(1, r)]).sum();
    let resid = DVector::from_fn(200, |t, _| state.lattice.values()[t] - uv);
    let covariance = (DMatrix::identity(7, 7) + x.transpose() * &x).try_inverse().unwrap();
    let mean = &covariance * (x.transpose() * resid);
    let sampler = Sampler::new(&data, 2).unwrap();
    let beta: Vec<[f64; 7]> = (0..draws)
        .map(|_| sampler.sample_beta(&state, Dyad::new(0, 1), &mut rng).unwrap().to_vector())
        .collect();
    let beta_z = (0..7)
        .map(|k| {
            let col: Vec<f64> = beta.iter().map(|d| d[k]).collect();
            moment_z(&col, mean[k], covariance[(k, k)])
        })
        .fold(0.0, f64::max);

    // Latent columns: per-player scalar regressions accumulated from the records.
    let data = random_dataset(&mut rng, 5, 1, 300, 0.3, (0.2, 0.2));
    let state = random_state(&data, 2, &mut rng);
    let sampler = Sampler::new(&data, 2).unwrap();
    let f = &state.factors[0];
    let mut latent_z: f64 = 0.0;
    for (side, r) in [(Side::Sender, 0), (Side::Sender, 1), (Side::Receiver, 0), (Side::Receiver, 1)] {
        let mut precision = [1.0; 5];
        let mut b = [0.0; 5];
        for (k, c) in data.covariates.iter().enumerate() {
            let (i, j) = (c.sender.index(), c.receiver.index());
            let xb: f64 = c.x().iter().zip(&state.beta[i * 5 + j]).map(|(a, b)| a * b).sum();
            let other = f.u[(i, 1 - r)] * f.v[(j, 1 - r)];
            let (me, w) = match side {
                Side::Sender => (i, f.v[(j, r)]),
                Side::Receiver => (j, f.u[(i, r)]),
            };
            precision[me] += w * w;
            b[me] += w * (state.lattice.values()[k] - xb - other);
        }
        let cols: Vec<Vec<f64>> = (0..draws)
            .map(|_| sampler.sample_latent_column(&state, GameId(0), side, r, &mut rng).unwrap())
            .collect();
        for p in 0..5 {
            let col: Vec<f64> = cols.iter().map(|d| d[p]).collect();
            latent_z = latent_z.max(moment_z(&col, b[p] / precision[p], 1.0 / precision[p]));
        }
    }
    (
        beta_z < 3.0 && latent_z < 3.0,
        format!("largest moment deviation {beta_z:.2} SE for beta, {latent_z:.2} SE for U/V columns ({draws} draws, limit 3)"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 5: single-cell MH chain against the quadrature posterior.

fn ks_to_quadrature(draws: &mut [f64], mu: f64, event: bool, dt: f64) -> f64 {
    let (lo, hi, h) = (mu - 12.0, mu + 12.0, 1e-4);
    let m = ((hi - lo) / h) as usize;
    let y = if event { 1.0 } else { 0.0 };
    let dens = |l: f64| (-(l - mu) * (l - mu) / 2.0 + y * (l + dt.ln()) - l.exp() * dt).exp();
    let mut cdf = vec![0.0; m + 1];
    for i in 1..=m {
        let (a, b) = (lo + (i - 1) as f64 * h, lo + i as f64 * h);
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens(a) + dens(b));
    }
    let z = cdf[m];
    let at = |l: f64| {
        let pos = ((l - lo) / h).clamp(0.0, m as f64 - 1e-9);
        let i = pos.floor() as usize;
        (cdf[i] + (pos - i as f64) * (cdf[i + 1] - cdf[i])) / z
    };
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let f = at(l);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn single_cell_ks(event: bool, seed: u64) -> f64 {
    // x·β = 1 − 0.5 = 0.5, Δ = 0.5.
    let x = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let mut beta = vec![[0.0; 7]; 4];
    beta[1][0] = 1.0;
    beta[1][3] = -0.5;
    let events = if event {
        vec![PassEvent {
            game: GameId(0),
            possession: PossessionId(0),
            interval_index: 0,
            sender: PlayerId(0),
            receiver: PlayerId(1),
        }]
    } else {
        vec![]
    };
    let data = Dataset::new(2, vec![record(0, 0, 0, 1, x, 0.5)], events).unwrap();
    let factors = vec![LatentFactorSet::zeros(GameId(0), 2, 1)];
    let mut state = ChainState::from_parts(&data, beta, factors, vec![0.5]).unwrap();
    let sampler = Sampler::new(&data, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        sampler.mh_update_lattice(&mut state, &mut rng);
    }
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| {
            sampler.mh_update_lattice(&mut state, &mut rng);
            state.lattice.values()[0]
        })
        .collect();
    ks_to_quadrature(&mut draws, 0.5, event, 0.5)
}

fn criterion_5() -> Outcome {
    let quiet = single_cell_ks(false, 505);
    let event = single_cell_ks(true, 506);
    (
        quiet < 0.02 && event < 0.02,
        format!("KS distance {quiet:.4} without an event, {event:.4} with one (10^5 draws, limit 0.02)"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 6: likelihood against the independent oracle.

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let games = rng.random_range(1..=3);
        let intervals = rng.random_range(1..=40);
        let p = rng.random_range(0.0..1.0);
        let data = random_dataset(&mut rng, n, games, intervals, p, (0.01, 2.0));
        let keys = data.covariates.iter().map(|c| c.key()).collect();
        let values = (0..data.covariates.len()).map(|_| rng.random_range(-10.0..5.0)).collect();
        let lattice = HazardLattice::new(keys, values).unwrap();
        let ours = sequence_loglik(&data.events, &lattice, &data.covariates).unwrap();
        let oracle = oracle_loglik(&data.events, &lattice, &data.covariates).unwrap();
        worst = worst.max((ours - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE));
    }
    (worst <= 1e-9, format!("largest relative difference {worst:.2e} over 1000 fuzzed cases (limit 1e-9)"))
}

// ---------------------------------------------------------------------------
// Criterion 7: spatial suite.

fn bumpy_grid(seed: u64, n: usize) -> TileGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locs: Vec<CourtLocation> = (0..n)
        .map(|i| {
            let (cx, cy) = if i % 3 == 0 { (20.0, 25.0) } else { (8.0, 10.0) };
            CourtLocation::new(cx + 6.0 * (rng.random::<f64>() - 0.5), cy + 6.0 * (rng.random::<f64>() - 0.5))
        })
        .collect();
    tile_counts(&locs).unwrap()
}

/// GCV by a bordered KKT solve per λ, sharing nothing with the spectral path:
/// minimize `|y − Kδ − Sa|² + λ 8π δᵀΩδ` subject to `Tᵀδ = 0`.
fn oracle_gcv_select(grid: &TileGrid, lambdas: &[f64]) -> f64 {
    let sites = tile_centers::<f64>();
    let knots = select_knots::<f64>(grid);
    let y = DVector::from_vec(grid.proportions::<f64>());
    let (n, m) = (sites.len(), knots.len());
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let x = DMatrix::from_fn(n, m + 3, |i, j| match j {
        j if j < m => tps_kernel(d2(sites[i], knots[j])),
        j if j == m => 1.0,
        j if j == m + 1 => sites[i][0],
        _ => sites[i][1],
    });
    let gram = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let omega = DMatrix::from_fn(m, m, |i, j| 8.0 * std::f64::consts::PI * tps_kernel(d2(knots[i], knots[j])));
    let p = m + 3;
    let scores: Vec<f64> = lambdas
        .iter()
        .map(|&lambda| {
            let mut kkt = DMatrix::zeros(p + 3, p + 3);
            kkt.view_mut((0, 0), (p, p)).copy_from(&gram);
            let pen = kkt.view((0, 0), (m, m)) + &omega * lambda;
            kkt.view_mut((0, 0), (m, m)).copy_from(&pen);
            for (i, k) in knots.iter().enumerate() {
                for (c, v) in [1.0, k[0], k[1]].into_iter().enumerate() {
                    kkt[(i, p + c)] = v;
                    kkt[(p + c, i)] = v;
                }
            }
            let lu = kkt.lu();
            let mut rhs = DVector::zeros(p + 3);
            rhs.rows_mut(0, p).copy_from(&xty);
            let coef = lu.solve(&rhs).unwrap();
            let fitted = &x * coef.rows(0, p);
            let rss = (&y - fitted).norm_squared();
            let mut rhs = DMatrix::zeros(p + 3, p);
            rhs.rows_mut(0, p).copy_from(&gram);
            let trace = lu.solve(&rhs).unwrap().rows(0, p).trace();
            n as f64 * rss / (n as f64 - trace).powi(2)
        })
        .collect();
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * best.abs().max(y.norm_squared() / n as f64);
    lambdas
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s <= best + tol)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn emitted_sum(field: &SpatialField<f64>, kind: FieldKind, position: Option<PositionClass>) -> f64 {
    let text = FieldTable::from_field(field, PlayerId(1), kind, position).to_text();
    FieldTable::<f64>::parse(&text).unwrap().values.iter().sum()
}

fn criterion_7() -> Outcome {
    // λ = 0 with knots at the sites interpolates.
    let mut residual: f64 = 0.0;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let sites: Vec<[f64; 2]> = (0..80)
            .map(|_| [rng.random_range(0.0..47.0), rng.random_range(0.0..50.0)])
            .collect();
        let y: Vec<f64> = sites.iter().map(|s| (s[0] / 7.0).sin() + rng.random::<f64>()).collect();
        let fit = TpsProblem::new(&sites, &y, &sites).unwrap().fit(0.0).unwrap();
        for (s, t) in sites.iter().zip(&y) {
            residual = residual.max((fit.spline.evaluate(*s) - t).abs());
        }
    }

    // Every emitted field integrates to one.
    let mut integral_err: f64 = 0.0;
    let mut emitted = 0;
    let mut check = |sum: f64| {
        integral_err = integral_err.max((sum - 1.0).abs());
        emitted += 1;
    };
    check(emitted_sum(&SpatialField::uniform(), FieldKind::Sender, None));
    let single = tile_counts(&[CourtLocation::new(10.2, 30.7)]).unwrap();
    for grid in [bumpy_grid(710, 40), bumpy_grid(711, 300), single] {
        for choice in [
            LambdaChoice::default(),
            LambdaChoice::Fixed(0.0),
            LambdaChoice::Fixed(1.0),
            LambdaChoice::Fixed(1e4),
        ] {
            check(emitted_sum(&fit_field(&grid, &choice).unwrap(), FieldKind::Sender, None));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(712);
    let passes: Vec<LocatedPass> = (0..60)
        .map(|k| LocatedPass {
            sender: PlayerId(k % 3),
            receiver: PlayerId(10 + k % 4),
            receiver_position: PositionClass::ALL[(k % 2) as usize],
            sender_location: CourtLocation::new(rng.random_range(0.0..47.0), rng.random_range(0.0..50.0)),
            receiver_location: CourtLocation::new(rng.random_range(0.0..47.0), rng.random_range(0.0..50.0)),
        })
        .collect();
    let store = FieldStore::fit(&passes, &LambdaChoice::default()).unwrap();
    for (_, fields) in store.players() {
        check(emitted_sum(&fields.xi, FieldKind::Sender, None));
        for (pos, f) in &fields.xi_tilde {
            check(emitted_sum(f, FieldKind::Receiver, Some(*pos)));
        }
    }

    // GCV against the grid-search oracle.
    let lambdas = default_lambda_grid::<f64>();
    let mut agree = 0;
    let mut picks = Vec::new();
    let fixtures = [bumpy_grid(720, 60), bumpy_grid(721, 150), bumpy_grid(722, 400)];
    for grid in &fixtures {
        let ours = gcv_select(grid, &lambdas).unwrap();
        let oracle = oracle_gcv_select(grid, &lambdas);
        agree += usize::from(ours == oracle);
        picks.push(format!("{ours:.2e}/{oracle:.2e}"));
    }
    (
        residual < 1e-6 && integral_err <= 1e-9 && agree == fixtures.len(),
        format!(
            "interpolation residual {residual:.1e}; {emitted} emitted fields within {integral_err:.1e} of unit mass; \
             gcv_select matches the oracle on {agree}/{} grids ({})",
            fixtures.len(),
            picks.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 8: ingest on hand-written fixtures.

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn criterion_8() -> Outcome {
    let frames = parse_tracking(&fixture("game1.tracking.csv")).unwrap().items;
    let annotations = parse_playbyplay(&fixture("game1.playbyplay.csv")).unwrap().items;
    let boxscore = parse_boxscore(&fixture("game1.boxscore.csv")).unwrap().items;

    let (record, _) = merge_streams(&frames, &annotations, &boxscore).unwrap();
    let possessions = segment_possessions(&record);
    let covered: Vec<usize> = possessions.iter().flat_map(|p| p.frames()).collect();
    let partition = covered == (0..record.frames.len()).collect::<Vec<_>>();
    let excluded: Vec<u32> = possessions.iter().filter(|p| p.excluded).map(|p| p.id.0).collect();

    let out = build_dataset(&frames, &annotations, &boxscore, &CovariateOptions::default()).unwrap();
    let mut ranks: BTreeMap<(GameId, u32), Vec<u32>> = BTreeMap::new();
    for c in &out.dataset.covariates {
        ranks.entry((c.game, c.interval_index)).or_default().push(c.w[3] as u32);
    }
    let full = BTreeSet::from([1, 2, 3, 4]);
    let bijective = !ranks.is_empty()
        && ranks
            .values()
            .all(|r| r.len() == 4 && r.iter().copied().collect::<BTreeSet<_>>() == full);
    let foul_cells = out.dataset.covariates.iter().any(|c| {
        possessions
            .iter()
            .filter(|p| p.excluded)
            .any(|p| p.frames().contains(&(c.interval_index as usize)))
    });

    let d = MarkupDialect::default();
    let stable = [
        {
            let t = fixture("game1.tracking.csv");
            tracking_to_text(&parse_tracking(&t).unwrap().items) == t
        },
        {
            let t = fixture("one_pass.playbyplay.csv");
            playbyplay_to_text(&parse_playbyplay(&t).unwrap().items) == t
        },
        {
            let once = playbyplay_to_text(&annotations);
            playbyplay_to_text(&parse_playbyplay(&once).unwrap().items) == once
        },
        {
            let t = fixture("game1.boxscore.csv");
            boxscore_to_text(&parse_boxscore(&t).unwrap().items) == t
        },
        {
            let t = fixture("game1.tracking.xml");
            markup::tracking_to_markup(&markup::parse_tracking(&t, &d).unwrap().items) == t
        },
        {
            let t = fixture("game1.boxscore.xml");
            markup::boxscore_to_markup(&markup::parse_boxscore(&t, &d).unwrap().items) == t
        },
    ];
    let stable_count = stable.iter().filter(|&&s| s).count();
    (
        partition && excluded.len() == 1 && !foul_cells && bijective && stable_count == stable.len(),
        format!(
            "{} possessions partition {} frames: {partition}; excluded {excluded:?} with no cells: {}; \
             ranks {{1,2,3,4}} in {}/{} intervals; {stable_count}/{} round trips byte-stable",
            possessions.len(),
            record.frames.len(),
            !foul_cells,
            ranks.values().filter(|r| r.iter().copied().collect::<BTreeSet<_>>() == full).count(),
            ranks.len(),
            stable.len()
        ),
    )
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(outcome) => outcome,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    // libtest-style invocations such as `--list` or filters are not supported.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let runs = panic::catch_unwind(|| (0..10u64).into_par_iter().map(run_seed).collect::<Vec<_>>());
    let shared = |f: fn(&[SeedRun]) -> Outcome| match &runs {
        Ok(r) => guarded(|| f(r)),
        Err(_) => (false, "seeded fits panicked".to_string()),
    };
    let results = [
        ("held-out ordering", shared(criterion_1)),
        ("beta coverage", shared(criterion_2)),
        ("UV' error decreases", shared(criterion_3)),
        ("conjugate moments", guarded(criterion_4)),
        ("MH stationarity", guarded(criterion_5)),
        ("likelihood oracle", guarded(criterion_6)),
        ("spatial suite", guarded(criterion_7)),
        ("ingest suite", guarded(criterion_8)),
    ];
    let mut failed = 0;
    for (i, (name, (pass, detail))) in results.iter().enumerate() {
        failed += usize::from(!pass);
        println!("criterion {} {name}: {} ({detail})", i + 1, if *pass { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
