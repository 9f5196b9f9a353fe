//! Per-subcommand flags. Each struct doubles as the matching config-file
//! table, so every field is optional and required values are checked after
//! the merge.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use shotarc::eval::EvalConfig;
use shotarc::makeprob::TrainConfig;
use shotarc::pipeline::FitConfig;
use shotarc::sim::SimConfig;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Directory for tracking.jsonl, events.csv, roster.csv and ground_truth.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base seed; the same seed reproduces the season byte for byte.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of games to simulate.
    #[arg(long)]
    pub n_games: Option<usize>,
    /// Tagged shot attempts per game.
    #[arg(long)]
    pub shots_per_game: Option<usize>,
    /// Per-frame ball noise, ft.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Fraction of shots with corrupted tracking.
    #[arg(long)]
    pub corruption_rate: Option<f64>,
    /// Full simulator settings; config file only. Flat keys above override it.
    #[arg(skip)]
    pub sim: Option<SimConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Ball and player frames (JSONL or CSV).
    #[arg(long)]
    pub tracking: Option<PathBuf>,
    /// Shot tags with release times and outcomes.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Player ids, heights and positions.
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// jsonl or csv; inferred from the tracking file extension when absent.
    #[arg(long)]
    pub format: Option<String>,
    /// Directory for trajectories.csv, factors.csv and filter_report.json.
    #[arg(long, visible_alias = "out")]
    pub out_dir: Option<PathBuf>,
    /// Largest accepted fit RMSE, ft.
    #[arg(long)]
    pub max_rmse: Option<f64>,
    /// Fewest ball samples a trajectory fit needs.
    #[arg(long)]
    pub min_samples: Option<usize>,
    /// Largest accepted gap between ball samples, s.
    #[arg(long)]
    pub max_gap: Option<f64>,
    /// Prior precision on the surface coefficients.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Weight of the release and rim pseudo-observations.
    #[arg(long)]
    pub pseudo_weight: Option<f64>,
    /// Full fitting settings; config file only.
    #[arg(skip)]
    pub pipeline: Option<FitConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// factors.csv written by fit.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    /// Ridge penalty on the non-intercept coefficients.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Iteration cap for the optimizer.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Fewest kept shots required to train.
    #[arg(long)]
    pub min_shots: Option<usize>,
    /// Also write the probability surface over a depth/left-right/angle grid.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Full training settings; config file only.
    #[arg(skip)]
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictArgs {
    /// Model JSON from train-makeprob.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// factors.csv to score.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Factors CSV with the prob column filled in.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectsArgs {
    /// factors.csv from fit or predict.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Make-probability model used to fill missing probabilities.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// defender or resilience.
    #[arg(long)]
    pub model_kind: Option<String>,
    /// raw (make/miss) or prob (modeled make probability).
    #[arg(long)]
    pub response_kind: Option<String>,
    /// Players with fewer shots are dropped before fitting.
    #[arg(long)]
    pub min_shots: Option<usize>,
    /// common_slope or literal (resilience model only).
    #[arg(long)]
    pub resilience_variant: Option<String>,
    /// Directory for the CSV, JSON and text tables.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Rows shown from each end of the text table.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    /// factors.csv from fit or predict.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Model JSON; needed for the analyses that use probabilities.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// fig3, fig4, fig5, depth_bins, split_half or all; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub analysis: Option<Vec<String>>,
    /// TOML file with the full evaluation settings.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Directory for one CSV per analysis plus eval_summary.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Subsample replicates per fraction.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Bootstrap replicates for the variance ratios.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Seeds both the bootstrap and the game subsamples.
    #[arg(long)]
    pub seed: Option<u64>,
    /// defender or resilience, for the subsample and split-half fits.
    #[arg(long)]
    pub model_kind: Option<String>,
    /// Players with fewer shots are dropped before effects fits.
    #[arg(long)]
    pub min_shots: Option<usize>,
    /// Inline evaluation settings; config file only. --spec replaces it.
    #[arg(skip)]
    pub eval: Option<EvalConfig>,
}
