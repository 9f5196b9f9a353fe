//! Subcommand bodies. Each takes its merged flags, writes its outputs and
//! returns the manifest describing the run.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use shotarc::effects::{fit_filtered, format_table, rank_players, EffectsConfig, ModelKind, ResponseKind};
use shotarc::eval::{evaluate as run_eval, Analysis, EvalConfig, EvalError};
use shotarc::ingest::TrackingFormat;
use shotarc::io::{read_csv, write_csv, write_json};
use shotarc::makeprob::{probability_surface, train, GridSpec, MakeProbModel, TrainConfig};
use shotarc::pipeline::{apply_model, effects_dataset, fit_files, FactorRecord, FitConfig};
use shotarc::sim::{write_season, SimConfig, SimError};
use shotarc::CourtGeometry;

use crate::args::{EffectsArgs, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, TrainArgs};
use crate::config::{snapshot, usage};
use crate::manifest::RunManifest;

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const FACTORS_FILE: &str = "factors.csv";
pub const FILTER_REPORT_FILE: &str = "filter_report.json";

fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| usage(format!("missing --{flag} (or `{}` in the config file)", flag.replace('-', "_"))))
}

fn existing(path: Option<PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
    let path = require(path, flag)?;
    if !path.is_file() {
        return Err(usage(format!("--{flag}: no such file {}", path.display())));
    }
    Ok(path)
}

fn out_dir(path: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = require(path, "out-dir")?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Parse a lowercase enum name through its serde representation.
fn parse_name<T: DeserializeOwned>(value: &str, flag: &str, choices: &str) -> anyhow::Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_ascii_lowercase()))
        .map_err(|_| usage(format!("--{flag}: unknown value {value:?} (expected {choices})")))
}

fn parse_model_kind(value: Option<&str>) -> anyhow::Result<Option<ModelKind>> {
    value.map(|v| parse_name(v, "model-kind", "defender or resilience")).transpose()
}

fn load_factors(path: &Path) -> anyhow::Result<Vec<FactorRecord>> {
    read_csv(path).with_context(|| format!("reading factors {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<MakeProbModel> {
    MakeProbModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// Fill in probabilities the file does not already carry.
fn fill_missing_probs(records: &mut [FactorRecord], model: &MakeProbModel) {
    let mut missing: Vec<FactorRecord> = records.iter().filter(|r| r.prob.is_none()).cloned().collect();
    apply_model(&mut missing, model);
    let mut filled = missing.into_iter();
    for r in records.iter_mut().filter(|r| r.prob.is_none()) {
        r.prob = filled.next().and_then(|f| f.prob);
    }
}

fn finish<T: Serialize>(
    command: &'static str,
    args: &T,
    seed: Option<u64>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> anyhow::Result<RunManifest> {
    RunManifest::new(command, snapshot(args), seed).inputs(inputs)?.outputs(outputs)
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<RunManifest> {
    let dir = require(a.out_dir.clone(), "out-dir")?;
    let mut cfg: SimConfig = a.sim.unwrap_or_default();
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.n_games = a.n_games.unwrap_or(cfg.n_games);
    cfg.shots_per_game = a.shots_per_game.unwrap_or(cfg.shots_per_game);
    cfg.noise_sd = a.noise_sd.unwrap_or(cfg.noise_sd);
    cfg.corruption_rate = a.corruption_rate.unwrap_or(cfg.corruption_rate);
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let summary = write_season(&cfg, &dir).map_err(|e| match e {
        SimError::Config(m) => usage(m),
        other => anyhow::Error::new(other).context("simulating season"),
    })?;
    eprintln!(
        "simulated {} games, {} shots ({} made, {} corrupted), {} frames",
        summary.games, summary.shots, summary.makes, summary.corrupted, summary.frames
    );
    let snap = SimulateArgs { sim: Some(cfg), ..a };
    finish("simulate", &snap, Some(cfg.seed), &[], &summary.files)
}

pub fn fit(a: FitArgs) -> anyhow::Result<RunManifest> {
    let tracking = existing(a.tracking.clone(), "tracking")?;
    let events = existing(a.events.clone(), "events")?;
    let roster = existing(a.roster.clone(), "roster")?;
    let format = match a.format.as_deref() {
        Some(f) => f.parse::<TrackingFormat>().map_err(|e| usage(e.to_string()))?,
        None => TrackingFormat::from_path(&tracking),
    };
    let mut cfg: FitConfig = a.pipeline.unwrap_or_default();
    if let Some(v) = a.max_rmse {
        cfg.filter.max_rmse = v;
    }
    if let Some(v) = a.min_samples {
        cfg.filter.min_samples = v;
        cfg.extract.min_samples = v;
        cfg.trajectory.min_samples = v;
    }
    if let Some(v) = a.max_gap {
        cfg.filter.max_gap = v;
    }
    if let Some(v) = a.epsilon {
        cfg.trajectory.prior.epsilon = v;
    }
    if let Some(v) = a.pseudo_weight {
        cfg.trajectory.prior.pseudo_weight = v;
    }
    let dir = out_dir(a.out_dir.clone())?;

    let out = fit_files(&tracking, format, &events, &roster, &cfg, &CourtGeometry::default())
        .context("fitting shots")?;
    let paths = [TRAJECTORIES_FILE, FACTORS_FILE, FILTER_REPORT_FILE].map(|f| dir.join(f));
    write_csv(&paths[0], &out.trajectories)?;
    write_csv(&paths[1], &out.factors)?;
    let report = serde_json::json!({
        "filter": out.report,
        "retention": out.report.retention_fraction(),
        "tracking_rows": out.tracking_report,
        "event_rows": out.events_report,
        "roster_rows": out.roster_report,
    });
    write_json(&paths[2], &report)?;
    eprintln!(
        "fit {} shots, retained {} ({:.1}%)",
        out.report.total,
        out.report.retained,
        100.0 * out.report.retention_fraction()
    );
    let snap = FitArgs { pipeline: Some(cfg), format: Some(format!("{format:?}").to_lowercase()), ..a };
    finish("fit", &snap, None, &[tracking, events, roster], &paths)
}

pub fn train_makeprob(a: TrainArgs) -> anyhow::Result<RunManifest> {
    let factors_path = existing(a.factors.clone(), "factors")?;
    let model_path = require(a.out_model.clone(), "out-model")?;
    let mut cfg: TrainConfig = a.train.unwrap_or_default();
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.max_iter = a.max_iter.unwrap_or(cfg.max_iter);
    cfg.min_shots = a.min_shots.unwrap_or(cfg.min_shots);

    let records = load_factors(&factors_path)?;
    let factors: Vec<_> = records.iter().map(FactorRecord::factors).collect();
    let made: Vec<bool> = records.iter().map(FactorRecord::is_make).collect();
    let model = train(&factors, &made, &cfg).context("training make-probability model")?;
    model.save(&model_path).with_context(|| format!("writing {}", model_path.display()))?;
    let mut outputs = vec![model_path];
    eprintln!(
        "trained on {} shots in {} iterations (converged: {})",
        model.train_n, model.iterations, model.converged
    );
    if let Some(path) = a.surface.clone() {
        let surface = probability_surface(&model, &GridSpec::default());
        write_csv(&path, &surface.cells)?;
        let m = surface.argmax;
        eprintln!(
            "surface peak {:.3} at depth {} in, left-right {} in, angle {} deg",
            m.probability, m.depth_in, m.lr_in, m.angle_deg
        );
        outputs.push(path);
    }
    let snap = TrainArgs { train: Some(cfg), ..a };
    finish("train-makeprob", &snap, None, &[factors_path], &outputs)
}

pub fn predict(a: PredictArgs) -> anyhow::Result<RunManifest> {
    let model_path = existing(a.model.clone(), "model")?;
    let factors_path = existing(a.factors.clone(), "factors")?;
    let out = require(a.out.clone(), "out")?;
    let model = load_model(&model_path)?;
    let mut records = load_factors(&factors_path)?;
    apply_model(&mut records, &model);
    write_csv(&out, &records)?;
    eprintln!("scored {} shots", records.len());
    finish("predict", &a, None, &[model_path, factors_path], &[out])
}

pub fn effects(a: EffectsArgs) -> anyhow::Result<RunManifest> {
    let factors_path = existing(a.factors.clone(), "factors")?;
    let model_path = a.model.clone().map(|p| existing(Some(p), "model")).transpose()?;
    let kind = parse_model_kind(a.model_kind.as_deref())?.unwrap_or(ModelKind::Defender);
    let response: ResponseKind = match a.response_kind.as_deref() {
        Some(v) => parse_name(v, "response-kind", "raw or prob")?,
        None => ResponseKind::Prob,
    };
    let mut cfg = EffectsConfig::default();
    cfg.min_shots = a.min_shots.unwrap_or(cfg.min_shots);
    if let Some(v) = a.resilience_variant.as_deref() {
        cfg.resilience_variant = parse_name(v, "resilience-variant", "common_slope or literal")?;
    }
    let top = a.top.unwrap_or(10);
    let dir = out_dir(a.out_dir.clone())?;

    let mut records = load_factors(&factors_path)?;
    if let Some(p) = &model_path {
        fill_missing_probs(&mut records, &load_model(p)?);
    }
    if response == ResponseKind::Prob && records.iter().any(|r| r.prob.is_none()) {
        return Err(usage("--response-kind prob needs a prob column; run predict first or pass --model"));
    }
    let (filtered, est) =
        fit_filtered(&effects_dataset(&records), kind, response, &cfg).context("fitting effect regression")?;
    let ranked = rank_players(&est);
    let title = match kind {
        ModelKind::Defender => "Nearest defender impact on shots (make probability per 100 shots)",
        ModelKind::Resilience => "Perimeter shooter resiliency to shot contests (per 100 shots, per foot closer)",
    };
    let stem = format!("effects_{kind}_{}", serde_json::to_value(response)?.as_str().unwrap_or("response"));
    let paths = ["csv", "json", "txt"].map(|ext| dir.join(format!("{stem}.{ext}")));
    write_csv(&paths[0], &ranked)?;
    let json = serde_json::json!({
        "rows_in": records.len(),
        "rows_after_min_shots": filtered.len(),
        "min_shots": cfg.min_shots,
        "estimates": est,
    });
    write_json(&paths[1], &json)?;
    let table = format_table(&ranked, top, title);
    std::fs::write(&paths[2], &table)?;
    eprint!("{table}");

    let mut inputs = vec![factors_path];
    inputs.extend(model_path);
    let snap = EffectsArgs {
        model_kind: Some(kind.to_string()),
        response_kind: serde_json::to_value(response)?.as_str().map(String::from),
        min_shots: Some(cfg.min_shots),
        resilience_variant: serde_json::to_value(cfg.resilience_variant)?.as_str().map(String::from),
        top: Some(top),
        ..a
    };
    finish("effects", &snap, None, &inputs, &paths)
}

fn eval_config(a: &EvaluateArgs) -> anyhow::Result<EvalConfig> {
    let mut cfg = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("--spec {}: {e}", p.display())))?;
            toml::from_str::<EvalConfig>(&text).map_err(|e| usage(format!("spec {}: {e}", p.display())))?
        }
        None => a.eval.clone().unwrap_or_default(),
    };
    if let Some(v) = a.replicates {
        cfg.subsample.n_replicates = v;
    }
    if let Some(v) = a.bootstrap {
        cfg.variance.n_bootstrap = v;
    }
    if let Some(v) = a.seed {
        cfg.variance.seed = v;
        cfg.subsample.seed = v;
    }
    if let Some(k) = parse_model_kind(a.model_kind.as_deref())? {
        cfg.model_kind = k;
    }
    if let Some(v) = a.min_shots {
        cfg.effects.min_shots = v;
    }
    Ok(cfg)
}

fn analyses(names: Option<&[String]>) -> anyhow::Result<Vec<Analysis>> {
    let names = match names {
        None | Some([]) => return Ok(Analysis::ALL.to_vec()),
        Some(n) => n,
    };
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(Analysis::ALL);
        } else {
            out.push(n.parse::<Analysis>().map_err(|e| usage(format!("--analysis: {e}")))?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn evaluate(a: EvaluateArgs) -> anyhow::Result<RunManifest> {
    let factors_path = existing(a.factors.clone(), "factors")?;
    let model_path = a.model.clone().map(|p| existing(Some(p), "model")).transpose()?;
    let cfg = eval_config(&a)?;
    let which = analyses(a.analysis.as_deref())?;
    let dir = out_dir(a.out_dir.clone())?;

    let mut records = load_factors(&factors_path)?;
    if let Some(p) = &model_path {
        fill_missing_probs(&mut records, &load_model(p)?);
    }
    let needs_prob = which.iter().any(|w| matches!(w, Analysis::Fig5 | Analysis::SplitHalf));
    if needs_prob && records.iter().any(|r| r.prob.is_none()) {
        return Err(usage("fig5 and split_half compare against modeled probabilities; pass --model or predicted factors"));
    }
    let report = run_eval(&records, &which, &cfg).map_err(|e| match e {
        EvalError::InvalidSpec(m) => usage(format!("evaluation spec: {m}")),
        other => anyhow::Error::new(other).context("evaluating"),
    })?;
    let outputs = report.write_dir(&dir)?;
    eprintln!("{}", serde_json::to_string_pretty(&report.summary())?);

    let mut inputs = vec![factors_path];
    inputs.extend(a.spec.iter().cloned());
    inputs.extend(model_path);
    let seed = cfg.subsample.seed;
    let snap = EvaluateArgs {
        analysis: Some(which.iter().map(|w| w.to_string()).collect()),
        eval: Some(cfg),
        ..a
    };
    finish("evaluate", &snap, Some(seed), &inputs, &outputs)
}
