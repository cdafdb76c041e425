use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use passnet_core::datafile::{
    covariates_to_text, events_to_text, parse_passes, parse_truth, passes_to_text, read_dataset, truth_to_text,
};
use passnet_core::evaluate::evaluate_chain;
use passnet_core::ingest::{self, markup, BoxScoreRow, CovariateOptions, Diagnostics, PlayAnnotation, TrackingFrame};
use passnet_core::model::{Dataset, GameId, PlayerId, PositionClass};
use passnet_core::sampler::io::{
    error_trace_to_text, factors_to_text, parse_samples, posterior_mean_factors, samples_to_text, summary_to_text,
};
use passnet_core::sampler::{run_chain, summarize, ChainConfig, ChainOutput, ModelKind};
use passnet_core::spatial::field::LambdaChoice;
use passnet_core::spatial::io::{FieldKind, FieldTable};
use passnet_core::spatial::player::build_player_fields;
use passnet_core::synthetic::{generate, split_train_test, SyntheticSpec, SyntheticTruth};
use rayon::prelude::*;

use crate::output::{read_input, Manifest, OutputDir};
use crate::{ChainArgs, CompareArgs, EvaluateArgs, ExportArgs, FitArgs, IngestArgs, SimulateArgs, SpatialArgs, SplitArg};

/// Flag combinations clap cannot reject on its own; exits with code 2.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--split-fraction {fraction} must lie strictly between 0 and 1")))
    }
}

fn chain_config(args: &ChainArgs, model: ModelKind, seed: u64) -> Result<ChainConfig> {
    let config = ChainConfig {
        iterations: args.iters,
        burn_in: args.burnin,
        thin: args.thin,
        rank: args.rank as usize,
        seed,
        model,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    check_fraction(args.split_fraction)?;
    Ok(config)
}

fn key_values(rows: &[(String, String)]) -> String {
    let mut out = String::from("key\tvalue\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    if !(a.dt > 0.0 && a.dt.is_finite()) {
        return Err(usage(format!("--dt {} must be positive", a.dt)));
    }
    let spec = SyntheticSpec {
        n_games: a.games as usize,
        n_players: a.players as usize,
        target_observations: a.obs as usize,
        rank: a.rank as usize,
        seed: a.seed,
        interval_length: a.dt,
        truth: None,
    };
    let manifest = Manifest::new("simulate")
        .config("games", a.games)
        .config("players", a.players)
        .config("obs", a.obs)
        .config("R", a.rank)
        .config("dt", a.dt)
        .seed(a.seed);
    let data = generate(&spec)?;
    let d = &data.dataset;

    let mut meta = vec![
        ("games".to_string(), a.games.to_string()),
        ("players".into(), a.players.to_string()),
        ("rank".into(), a.rank.to_string()),
        ("seed".into(), a.seed.to_string()),
        ("interval_length".into(), a.dt.to_string()),
        ("intervals".into(), d.n_intervals().to_string()),
        ("cells".into(), d.covariates.len().to_string()),
        ("events".into(), d.events.len().to_string()),
    ];
    for (g, n) in spec.intervals_per_game().iter().enumerate() {
        meta.push((format!("intervals/{g}"), n.to_string()));
    }

    let mut out = OutputDir::create(&a.out, a.force)?;
    out.write("covariates.tsv", &covariates_to_text(d.n_players, &d.covariates))?;
    out.write("events.tsv", &events_to_text(&d.events))?;
    out.write("truth.tsv", &truth_to_text(&data.truth))?;
    out.write("meta.tsv", &key_values(&meta))?;
    let dir = out.commit(manifest)?;
    info!("wrote {} intervals to {}", d.n_intervals(), dir.display());
    Ok(())
}

fn is_markup(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"))
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let mut manifest = Manifest::new("ingest")
        .config("uniform_fields", a.uniform_fields)
        .config("frames_per_interval", a.frames_per_interval);
    let dialect = markup::MarkupDialect::default();
    let mut diagnostics = Diagnostics::default();

    let text = read_input(&a.tracking, &mut manifest)?;
    let parsed = if is_markup(&a.tracking) {
        markup::parse_tracking(&text, &dialect)
    } else {
        ingest::parse_tracking(&text)
    }
    .with_context(|| format!("reading {}", a.tracking.display()))?;
    diagnostics.absorb(parsed.diagnostics);
    let frames: Vec<TrackingFrame> = parsed.items;

    let text = read_input(&a.playbyplay, &mut manifest)?;
    let parsed = if is_markup(&a.playbyplay) {
        markup::parse_playbyplay(&text, &dialect)
    } else {
        ingest::parse_playbyplay(&text)
    }
    .with_context(|| format!("reading {}", a.playbyplay.display()))?;
    diagnostics.absorb(parsed.diagnostics);
    let annotations: Vec<PlayAnnotation> = parsed.items;

    let text = read_input(&a.boxscore, &mut manifest)?;
    let parsed = if is_markup(&a.boxscore) {
        markup::parse_boxscore(&text, &dialect)
    } else {
        ingest::parse_boxscore(&text)
    }
    .with_context(|| format!("reading {}", a.boxscore.display()))?;
    diagnostics.absorb(parsed.diagnostics);
    let boxscore: Vec<BoxScoreRow> = parsed.items;

    let options = CovariateOptions {
        frames_per_interval: a.frames_per_interval as usize,
        fields: if a.uniform_fields { None } else { Some(LambdaChoice::default()) },
    };
    let result = ingest::build_dataset(&frames, &annotations, &boxscore, &options)?;
    diagnostics.absorb(result.diagnostics);
    let d = &result.dataset;

    let mut players = String::from("player\traw_id\tposition\n");
    for (k, raw) in result.registry.raw_ids().iter().enumerate() {
        let pos = result.positions.get(raw).map_or("-", |p| p.code());
        let _ = writeln!(players, "{k}\t{raw}\t{pos}");
    }

    let mut possessions =
        String::from("game\tpossession\tstart_frame\tend_frame\tstart_time\tend_time\toffense\toutcome\texcluded\tincomplete\n");
    for g in &result.games {
        for p in &g.possessions {
            let _ = writeln!(
                possessions,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.game,
                p.id,
                p.start_frame,
                p.end_frame,
                p.start_time,
                p.end_time,
                p.offense.map_or("-", |s| s.code()),
                p.outcome.map_or("-", |o| o.as_str()),
                p.excluded,
                p.incomplete
            );
        }
    }

    let mut diag = vec![
        ("corrupt_rows".to_string(), diagnostics.corrupt_rows.to_string()),
        ("unknown_labels".into(), diagnostics.unknown_labels.to_string()),
        ("messages".into(), diagnostics.messages.len().to_string()),
    ];
    for (i, m) in diagnostics.messages.iter().enumerate() {
        diag.push((format!("message/{i}"), m.replace(['\t', '\n'], " ")));
    }

    let mut out = OutputDir::create(&a.out, a.force)?;
    out.write("covariates.tsv", &covariates_to_text(d.n_players, &d.covariates))?;
    out.write("events.tsv", &events_to_text(&d.events))?;
    out.write("players.tsv", &players)?;
    out.write("possessions.tsv", &possessions)?;
    out.write("passes.tsv", &passes_to_text(&result.passes))?;
    out.write("diagnostics.tsv", &key_values(&diag))?;
    out.commit(manifest)?;
    if !diagnostics.is_clean() {
        eprintln!(
            "ingest: {} corrupt rows, {} unknown labels, {} notes (see diagnostics.tsv)",
            diagnostics.corrupt_rows,
            diagnostics.unknown_labels,
            diagnostics.messages.len()
        );
    }
    Ok(())
}

struct LoadedData {
    dataset: Dataset<f64>,
    truth: Option<SyntheticTruth>,
}

fn load_data(dir: &Path, manifest: &mut Manifest) -> Result<LoadedData> {
    let cov = read_input(&dir.join("covariates.tsv"), manifest)?;
    let events = read_input(&dir.join("events.tsv"), manifest)?;
    let dataset = read_dataset(&cov, &events).with_context(|| format!("inconsistent dataset in {}", dir.display()))?;
    let truth_path = dir.join("truth.tsv");
    let truth = if truth_path.exists() {
        let text = read_input(&truth_path, manifest)?;
        Some(parse_truth(&text).with_context(|| format!("reading {}", truth_path.display()))?)
    } else {
        None
    };
    Ok(LoadedData { dataset, truth })
}

/// True factors usable for error traces of `output`, if they line up.
fn matching_truth<'a>(truth: Option<&'a SyntheticTruth>, output: &ChainOutput<f64>) -> Option<&'a [passnet_core::model::LatentFactorSet<f64>]> {
    let t = truth?;
    if output.rank == 0 {
        return None;
    }
    let games: Vec<GameId> = t.factors.iter().map(|f| f.game).collect();
    let fits = t.rank() == output.rank && games == output.games;
    if !fits {
        log::warn!("truth.tsv does not match the fitted games or rank; skipping error traces");
    }
    fits.then_some(t.factors.as_slice())
}

pub fn fit(a: FitArgs) -> Result<()> {
    let model = ModelKind::from(a.model);
    let configs = (0..u64::from(a.chains))
        .map(|k| chain_config(&a.chain, model, a.chain.seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest::new("fit")
        .config("model", model.as_str())
        .config("R", a.chain.rank)
        .config("iters", a.chain.iters)
        .config("burnin", a.chain.burnin)
        .config("thin", a.chain.thin)
        .config("split_fraction", a.chain.split_fraction)
        .config("chains", a.chains)
        .seed(a.chain.seed);
    let data = load_data(&a.data, &mut manifest)?;
    let (train, _) = split_train_test(&data.dataset, a.chain.split_fraction)?;
    info!("fitting {} on {} training cells", model.as_str(), train.covariates.len());

    let outputs = configs
        .par_iter()
        .map(|c| run_chain(c, &train))
        .collect::<passnet_core::Result<Vec<_>>>()?;

    let mut out = OutputDir::create(&a.out, a.force)?;
    for (k, output) in outputs.iter().enumerate() {
        let suffix = if outputs.len() == 1 { String::new() } else { format!(".{k}") };
        let summary = summarize(output, matching_truth(data.truth.as_ref(), output))?;
        out.write(&format!("samples{suffix}.tsv"), &samples_to_text(output))?;
        out.write(&format!("summary{suffix}.tsv"), &summary_to_text(&summary))?;
        if let Some(trace) = &summary.error_trace {
            out.write(&format!("error_trace{suffix}.tsv"), &error_trace_to_text(trace))?;
        }
    }
    out.commit(manifest)?;
    Ok(())
}

fn pick_split(data: &Dataset<f64>, split: SplitArg, fraction: f64) -> Result<Dataset<f64>> {
    check_fraction(fraction)?;
    let (train, test) = split_train_test(data, fraction)?;
    Ok(match split {
        SplitArg::Train => train,
        SplitArg::Test => test,
    })
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.samples).with_context(|| format!("reading {}", a.samples.display()))?;
    let output: ChainOutput<f64> = parse_samples(&text).with_context(|| format!("reading {}", a.samples.display()))?;
    let mut manifest = Manifest::new("evaluate");
    let data = load_data(&a.data, &mut manifest)?;
    let split = pick_split(&data.dataset, a.split, a.split_fraction)?;
    let name = match a.split {
        SplitArg::Train => "train",
        SplitArg::Test => "test",
    };
    let report = evaluate_chain(&output, &split).with_context(|| format!("evaluating the {name} split"))?;
    let rows = [
        ("split".to_string(), name.to_string()),
        ("model".into(), output.model.as_str().to_string()),
        ("cells".into(), report.n_cells.to_string()),
        ("draws".into(), report.n_draws.to_string()),
        ("posterior_mean_loglik".into(), report.posterior_mean.to_string()),
        ("draw_mean".into(), report.draw_mean.to_string()),
        ("draw_sd".into(), report.draw_sd.to_string()),
        ("loglik".into(), report.to_string()),
    ];
    print!("{}", key_values(&rows));
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let latent = chain_config(&a.chain, ModelKind::Latent, a.chain.seed)?;
    let covariates = chain_config(&a.chain, ModelKind::Covariates, a.chain.seed)?;
    let mut manifest = Manifest::new("compare");
    let data = load_data(&a.data, &mut manifest)?;
    let (train, test) = split_train_test(&data.dataset, a.chain.split_fraction)?;
    let (l, c) = rayon::join(|| run_chain(&latent, &train), || run_chain(&covariates, &train));
    let mut table = String::from("model\ttrain\ttest\ttest_posterior_mean\n");
    for output in [l?, c?] {
        let tr = evaluate_chain(&output, &train)?;
        let te = evaluate_chain(&output, &test).context("evaluating the test split")?;
        let _ = writeln!(table, "{}\t{tr}\t{te}\t{:.2}", output.model.as_str(), te.posterior_mean);
    }
    print!("{table}");
    Ok(())
}

pub fn export_factors(a: ExportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.samples).with_context(|| format!("reading {}", a.samples.display()))?;
    let output: ChainOutput<f64> = parse_samples(&text)?;
    let factors = posterior_mean_factors(&output, GameId(a.game))?;
    let table = factors_to_text(&factors);
    match a.out {
        Some(path) => fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

pub fn spatial(a: SpatialArgs) -> Result<()> {
    let mut manifest = Manifest::new("spatial").config("player", a.player);
    let passes = parse_passes(&read_input(&a.ingest.join("passes.tsv"), &mut manifest)?)?;
    let player = PlayerId(a.player);
    let fields = build_player_fields(&passes, player, &LambdaChoice::default())
        .with_context(|| format!("fitting fields for player {}", a.player))?;
    let mut out = OutputDir::create(&a.out, a.force)?;
    out.write("sender.tsv", &FieldTable::from_field(&fields.xi, player, FieldKind::Sender, None).to_text())?;
    for pos in PositionClass::ALL {
        if let Some(f) = fields.xi_tilde.get(&pos) {
            let table = FieldTable::from_field(f, player, FieldKind::Receiver, Some(pos));
            out.write(&format!("receiver_{}.tsv", pos.code()), &table.to_text())?;
        }
    }
    out.commit(manifest)?;
    Ok(())
}
