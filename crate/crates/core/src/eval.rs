//! Season-level analyses: contested/open variance ratios, binned factor
//! profiles, make rates by depth, subsample MSE curves and split-half rank
//! stability of player effects.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{
    fit_effects, EffectEstimates, EffectsConfig, EffectsDataset, EffectsError, ModelKind, ResponseKind,
};
use crate::geometry::{GameId, ShotFactors};
use crate::io::{write_csv, write_json, IoError};
use crate::pipeline::FactorRecord;
use crate::stats::{mean, percentile_interval, spearman, std_err, variance, StatsError};

const FEET_TO_INCHES: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{group} group has {n} shot(s); need at least {min}")]
    GroupTooSmall { group: &'static str, n: usize, min: usize },
    #[error("invalid evaluation settings: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Effects(#[from] EffectsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The per-shot fields the analyses read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotObs {
    pub ndd: f64,
    pub defender_height_in: f64,
    pub factors: ShotFactors,
    pub made: bool,
    pub prob: Option<f64>,
}

impl From<&FactorRecord> for ShotObs {
    fn from(r: &FactorRecord) -> Self {
        ShotObs {
            ndd: r.ndd,
            defender_height_in: r.defender_height_in,
            factors: r.factors(),
            made: r.is_make(),
            prob: r.prob,
        }
    }
}

pub fn observations(records: &[FactorRecord]) -> Vec<ShotObs> {
    records.iter().map(ShotObs::from).collect()
}

// ---------------------------------------------------------------------------
// Contested vs. open variance

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceConfig {
    /// Shots with NDD above this are open.
    pub open_threshold: f64,
    /// Shots with NDD below this are contested.
    pub contested_threshold: f64,
    pub n_bootstrap: usize,
    pub level: f64,
    pub min_n: usize,
    pub seed: u64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self { open_threshold: 6.0, contested_threshold: 4.0, n_bootstrap: 1000, level: 0.95, min_n: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub factor: String,
    pub n_contested: usize,
    pub n_open: usize,
    pub var_contested: f64,
    pub var_open: f64,
    /// Contested variance over open variance.
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Variance ratio per factor for contested against open shots, with
/// Pulls one factor, in inches, out of a shot.
type Column = fn(&ShotFactors) -> f64;

/// percentile bootstrap intervals (each group resampled on its own).
pub fn variance_comparison(shots: &[ShotObs], cfg: &VarianceConfig) -> Result<Vec<VarianceRow>, EvalError> {
    if cfg.contested_threshold > cfg.open_threshold {
        return Err(EvalError::InvalidSpec("contested threshold exceeds open threshold".into()));
    }
    let contested: Vec<&ShotObs> = shots.iter().filter(|s| s.ndd < cfg.contested_threshold).collect();
    let open: Vec<&ShotObs> = shots.iter().filter(|s| s.ndd > cfg.open_threshold).collect();
    for (group, g) in [("contested", &contested), ("open", &open)] {
        if g.len() < cfg.min_n.max(2) {
            return Err(EvalError::GroupTooSmall { group, n: g.len(), min: cfg.min_n.max(2) });
        }
    }
    let pick = |g: &[&ShotObs], f: Column| g.iter().map(|s| f(&s.factors)).collect::<Vec<f64>>();
    let columns: [(&str, Column); 2] =
        [("depth", |f| f.depth * FEET_TO_INCHES), ("left_right", |f| f.left_right * FEET_TO_INCHES)];
    let data: Vec<(Vec<f64>, Vec<f64>)> = columns.iter().map(|(_, f)| (pick(&contested, *f), pick(&open, *f))).collect();

    // Both factors share each replicate's resampled indices.
    let boot: Vec<Vec<f64>> = (0..cfg.n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(cfg.seed, b as u64);
            let ic: Vec<usize> = (0..contested.len()).map(|_| rng.random_range(0..contested.len())).collect();
            let io: Vec<usize> = (0..open.len()).map(|_| rng.random_range(0..open.len())).collect();
            data.iter()
                .map(|(c, o)| {
                    let vc = variance(&ic.iter().map(|&i| c[i]).collect::<Vec<_>>());
                    let vo = variance(&io.iter().map(|&i| o[i]).collect::<Vec<_>>());
                    vc / vo
                })
                .collect()
        })
        .collect();

    Ok(columns
        .iter()
        .zip(&data)
        .enumerate()
        .map(|(k, ((name, _), (c, o)))| {
            let (var_contested, var_open) = (variance(c), variance(o));
            let ratios: Vec<f64> = boot.iter().map(|r| r[k]).collect();
            let (ci_low, ci_high) = percentile_interval(&ratios, cfg.level);
            VarianceRow {
                factor: name.to_string(),
                n_contested: c.len(),
                n_open: o.len(),
                var_contested,
                var_open,
                ratio: var_contested / var_open,
                ci_low,
                ci_high,
            }
        })
        .collect())
}

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Binned profiles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinBy {
    Ndd,
    DefenderHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileValue {
    EntryAngle,
    Depth,
    LeftRight,
}

impl BinBy {
    fn key(self, s: &ShotObs) -> f64 {
        match self {
            BinBy::Ndd => s.ndd,
            BinBy::DefenderHeight => s.defender_height_in,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinBy::Ndd => "ndd_ft",
            BinBy::DefenderHeight => "defender_height_in",
        }
    }
}

impl ProfileValue {
    fn value(self, s: &ShotObs) -> f64 {
        match self {
            ProfileValue::EntryAngle => s.factors.entry_angle,
            ProfileValue::Depth => s.factors.depth * FEET_TO_INCHES,
            ProfileValue::LeftRight => s.factors.left_right * FEET_TO_INCHES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileValue::EntryAngle => "entry_angle_deg",
            ProfileValue::Depth => "depth_in",
            ProfileValue::LeftRight => "left_right_in",
        }
    }
}

/// Half-open bins `[origin + k·width, origin + (k+1)·width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub origin: f64,
    pub width: f64,
}

impl BinSpec {
    pub fn new(origin: f64, width: f64) -> Result<Self, EvalError> {
        if !(width > 0.0 && width.is_finite() && origin.is_finite()) {
            return Err(EvalError::InvalidSpec(format!("bin width must be positive and finite, got {width}")));
        }
        Ok(Self { origin, width })
    }

    fn index(&self, x: f64) -> i64 {
        ((x - self.origin) / self.width).floor() as i64
    }

    fn lower(&self, k: i64) -> f64 {
        self.origin + k as f64 * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub bin_by: String,
    pub value: String,
    pub bin_low: f64,
    pub bin_high: f64,
    pub n: usize,
    /// Empty bins carry no mean.
    pub mean: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub bin_by: BinBy,
    pub value: ProfileValue,
    pub bins: Vec<ProfileBin>,
    /// Spearman correlation of bin midpoint against bin mean over non-empty
    /// bins; absent with fewer than two bins or a flat profile.
    pub trend: Option<f64>,
}

/// Per-bin mean and standard error of `value`, spanning every bin between
/// the smallest and largest observed key. Empty bins are kept with `n = 0`.
pub fn binned_profiles(shots: &[ShotObs], bin_by: BinBy, value: ProfileValue, bins: &BinSpec) -> Profile {
    let keyed: Vec<(i64, f64)> = shots
        .iter()
        .filter(|s| bin_by.key(s).is_finite())
        .map(|s| (bins.index(bin_by.key(s)), value.value(s)))
        .collect();
    let mut out = Vec::new();
    if let (Some(lo), Some(hi)) = (keyed.iter().map(|k| k.0).min(), keyed.iter().map(|k| k.0).max()) {
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); (hi - lo + 1) as usize];
        for (k, v) in &keyed {
            groups[(k - lo) as usize].push(*v);
        }
        for (i, g) in groups.into_iter().enumerate() {
            let k = lo + i as i64;
            out.push(ProfileBin {
                bin_by: bin_by.name().into(),
                value: value.name().into(),
                bin_low: bins.lower(k),
                bin_high: bins.lower(k + 1),
                n: g.len(),
                mean: (!g.is_empty()).then(|| mean(&g)),
                se: (g.len() >= 2).then(|| std_err(&g)),
            });
        }
    }
    let filled: Vec<(f64, f64)> =
        out.iter().filter_map(|b| b.mean.map(|m| (0.5 * (b.bin_low + b.bin_high), m))).collect();
    let trend = (filled.len() >= 2)
        .then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = filled.into_iter().unzip();
            spearman(&x, &y).ok()
        })
        .flatten();
    Profile { bin_by, value, bins: out, trend }
}

// ---------------------------------------------------------------------------
// Make rate by depth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBin {
    /// Bin center in inches; bins are `[center − w/2, center + w/2)`.
    pub depth_in: f64,
    pub n: usize,
    pub makes: usize,
    pub make_pct: f64,
    /// Mean modeled probability over the bin, when every shot carries one.
    pub mean_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBins {
    pub bin_width_in: f64,
    pub bins: Vec<DepthBin>,
    /// Center of the bin with the highest make fraction among bins with at
    /// least `min_n_for_argmax` shots (ties go to the shallower bin).
    pub argmax_in: Option<f64>,
    pub min_n_for_argmax: usize,
}

/// Make fraction per depth bin, with bins centered on multiples of the width.
/// Only non-empty bins are listed.
pub fn make_pct_by_depth_bin(shots: &[ShotObs], bin_width_in: f64, min_n_for_argmax: usize) -> Result<DepthBins, EvalError> {
    if !(bin_width_in > 0.0 && bin_width_in.is_finite()) {
        return Err(EvalError::InvalidSpec(format!("depth bin width must be positive, got {bin_width_in}")));
    }
    let mut acc: std::collections::BTreeMap<i64, (usize, usize, f64, usize)> = std::collections::BTreeMap::new();
    for s in shots {
        let d = s.factors.depth * FEET_TO_INCHES;
        if !d.is_finite() {
            continue;
        }
        let e = acc.entry((d / bin_width_in).round() as i64).or_default();
        e.0 += 1;
        e.1 += usize::from(s.made);
        if let Some(p) = s.prob {
            e.2 += p;
            e.3 += 1;
        }
    }
    let bins: Vec<DepthBin> = acc
        .into_iter()
        .map(|(k, (n, makes, psum, pn))| DepthBin {
            depth_in: k as f64 * bin_width_in,
            n,
            makes,
            make_pct: makes as f64 / n as f64,
            mean_prob: (pn == n).then(|| psum / n as f64),
        })
        .collect();
    let mut argmax: Option<&DepthBin> = None;
    for b in bins.iter().filter(|b| b.n >= min_n_for_argmax.max(1)) {
        if argmax.is_none_or(|a| b.make_pct > a.make_pct) {
            argmax = Some(b);
        }
    }
    Ok(DepthBins { bin_width_in, argmax_in: argmax.map(|b| b.depth_in), bins, min_n_for_argmax })
}

// ---------------------------------------------------------------------------
// Subsample MSE

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsampleSpec {
    pub fractions: Vec<f64>,
    pub n_replicates: usize,
    pub seed: u64,
}

impl Default for SubsampleSpec {
    fn default() -> Self {
        Self { fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5], n_replicates: 20, seed: 0 }
    }
}

impl SubsampleSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.fractions.is_empty() {
            return Err(EvalError::InvalidSpec("no subsample fractions".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(EvalError::InvalidSpec(format!("fraction {f} outside (0, 1]")));
        }
        if self.n_replicates == 0 {
            return Err(EvalError::InvalidSpec("need at least one replicate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub model_kind: ModelKind,
    pub response: ResponseKind,
    pub fraction: f64,
    pub n_games: usize,
    /// Mean over kept replicates; absent when every replicate was dropped.
    pub mse: Option<f64>,
    pub mse_median: Option<f64>,
    pub replicates: usize,
    pub dropped: usize,
}

/// Games drawn for one replicate. Depends only on the seed, fraction index and
/// replicate, so raw and prob responses see the same subsets.
pub fn subsample_games(games: &[GameId], fraction: f64, seed: u64, fraction_index: usize, replicate: usize) -> BTreeSet<GameId> {
    let k = ((fraction * games.len() as f64).round() as usize).clamp(1, games.len());
    let mut rng = replicate_rng(seed, ((fraction_index as u64) << 32) | replicate as u64);
    sample(&mut rng, games.len(), k).into_iter().map(|i| games[i].clone()).collect()
}

fn mean_sq_dev(fit: &EffectEstimates, reference: &EffectEstimates) -> Option<f64> {
    let mut s = 0.0;
    for (p, r) in &reference.player_effects {
        let g = fit.player_effects.get(p)?;
        s += (g - r) * (g - r);
    }
    Some(s / reference.player_effects.len() as f64)
}

/// MSE of subsample γ against `reference` (the full-season raw-response fit)
/// for every fraction. `dataset` should already be filtered to the reference
/// fit's players; it is not filtered again. A replicate is dropped when its
/// design loses rank or a reference player has no rows.
pub fn subsample_mse(
    dataset: &EffectsDataset,
    spec: &SubsampleSpec,
    kind: ModelKind,
    response: ResponseKind,
    cfg: &EffectsConfig,
    reference: &EffectEstimates,
) -> Result<Vec<MseRow>, EvalError> {
    spec.validate()?;
    let games: Vec<GameId> = dataset.games().into_iter().collect();
    if games.is_empty() {
        return Err(EvalError::InvalidSpec("dataset has no games".into()));
    }
    let mut rows = Vec::with_capacity(spec.fractions.len());
    for (fi, &fraction) in spec.fractions.iter().enumerate() {
        let mses: Vec<Option<f64>> = (0..spec.n_replicates)
            .into_par_iter()
            .map(|r| {
                let subset = dataset.restrict_to_games(&subsample_games(&games, fraction, spec.seed, fi, r));
                fit_effects(&subset, kind, response, cfg.resilience_variant)
                    .ok()
                    .and_then(|fit| mean_sq_dev(&fit, reference))
            })
            .collect();
        let kept: Vec<f64> = mses.iter().flatten().copied().collect();
        rows.push(MseRow {
            model_kind: kind,
            response,
            fraction,
            n_games: ((fraction * games.len() as f64).round() as usize).clamp(1, games.len()),
            mse: (!kept.is_empty()).then(|| mean(&kept)),
            mse_median: (!kept.is_empty()).then(|| crate::stats::median(&kept)),
            replicates: kept.len(),
            dropped: mses.len() - kept.len(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Split-half stability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHalf {
    pub model_kind: ModelKind,
    pub response: ResponseKind,
    pub rho: f64,
    /// Players with an effect in both halves.
    pub n_players: usize,
    pub games_first: usize,
    pub games_second: usize,
    pub shots_first: usize,
    pub shots_second: usize,
}

/// Split the games in id order (the first ⌈n/2⌉ form the first half), fit
/// each half, and rank-correlate the player effects both halves share.
pub fn split_half_rank_correlation(
    dataset: &EffectsDataset,
    kind: ModelKind,
    response: ResponseKind,
    cfg: &EffectsConfig,
) -> Result<SplitHalf, EvalError> {
    let games: Vec<GameId> = dataset.games().into_iter().collect();
    let cut = games.len().div_ceil(2);
    let first_games: BTreeSet<GameId> = games[..cut].iter().cloned().collect();
    let second_games: BTreeSet<GameId> = games[cut..].iter().cloned().collect();
    let half = |g: &BTreeSet<GameId>| {
        let d = dataset.restrict_to_games(g);
        match kind {
            ModelKind::Defender => d.largest_connected_block(),
            ModelKind::Resilience => d,
        }
    };
    let first = half(&first_games);
    let second = half(&second_games);
    let a = fit_effects(&first, kind, response, cfg.resilience_variant)?;
    let b = fit_effects(&second, kind, response, cfg.resilience_variant)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        a.player_effects.iter().filter_map(|(p, g)| b.player_effects.get(p).map(|h| (*g, *h))).unzip();
    Ok(SplitHalf {
        model_kind: kind,
        response,
        rho: spearman(&xs, &ys)?,
        n_players: xs.len(),
        games_first: first_games.len(),
        games_second: second_games.len(),
        shots_first: first.len(),
        shots_second: second.len(),
    })
}

// ---------------------------------------------------------------------------
// Bundled report

pub const FIG3_FILE: &str = "fig3_variance.csv";
pub const FIG4_FILE: &str = "fig4_profiles.csv";
pub const FIG5_FILE: &str = "fig5_mse.csv";
pub const DEPTH_BINS_FILE: &str = "depth_bins.csv";
pub const SPLIT_HALF_FILE: &str = "split_half.csv";
pub const SUMMARY_FILE: &str = "eval_summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Fig3,
    Fig4,
    Fig5,
    DepthBins,
    SplitHalf,
}

impl Analysis {
    pub const ALL: [Analysis; 5] = [Analysis::Fig3, Analysis::Fig4, Analysis::Fig5, Analysis::DepthBins, Analysis::SplitHalf];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Fig3 => "fig3",
            Analysis::Fig4 => "fig4",
            Analysis::Fig5 => "fig5",
            Analysis::DepthBins => "depth_bins",
            Analysis::SplitHalf => "split_half",
        }
    }
}

impl std::fmt::Display for Analysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Analysis {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fig3" | "variance" => Analysis::Fig3,
            "fig4" | "profiles" => Analysis::Fig4,
            "fig5" | "mse" => Analysis::Fig5,
            "depth_bins" | "depth" => Analysis::DepthBins,
            "split_half" | "split" => Analysis::SplitHalf,
            other => return Err(EvalError::InvalidSpec(format!("unknown analysis '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub variance: VarianceConfig,
    pub ndd_bins: BinSpec,
    pub height_bins: BinSpec,
    pub depth_bin_width_in: f64,
    pub depth_argmax_min_n: usize,
    pub subsample: SubsampleSpec,
    pub effects: EffectsConfig,
    pub model_kind: ModelKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            variance: VarianceConfig::default(),
            ndd_bins: BinSpec { origin: 0.0, width: 2.0 },
            height_bins: BinSpec { origin: 0.0, width: 2.0 },
            depth_bin_width_in: 1.0,
            depth_argmax_min_n: 100,
            subsample: SubsampleSpec::default(),
            effects: EffectsConfig::default(),
            model_kind: ModelKind::Defender,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variance: Vec<VarianceRow>,
    pub profiles: Vec<Profile>,
    pub depth_bins: Option<DepthBins>,
    pub mse: Vec<MseRow>,
    pub split_half: Vec<SplitHalf>,
}

/// Run the requested analyses. Fig. 5 and split-half need modeled
/// probabilities on every record. Records are put in `shot_id` order first,
/// so the report does not depend on input order down to the last bit.
pub fn evaluate(records: &[FactorRecord], analyses: &[Analysis], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut sorted: Vec<&FactorRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.shot_id.cmp(&b.shot_id));
    let records: Vec<FactorRecord> = sorted.into_iter().cloned().collect();
    let records = records.as_slice();
    let shots = observations(records);
    let mut report = EvalReport::default();
    if analyses.contains(&Analysis::Fig3) {
        report.variance = variance_comparison(&shots, &cfg.variance)?;
    }
    if analyses.contains(&Analysis::Fig4) {
        for (by, spec) in [(BinBy::Ndd, &cfg.ndd_bins), (BinBy::DefenderHeight, &cfg.height_bins)] {
            for value in [ProfileValue::EntryAngle, ProfileValue::Depth] {
                report.profiles.push(binned_profiles(&shots, by, value, &BinSpec::new(spec.origin, spec.width)?));
            }
        }
    }
    if analyses.contains(&Analysis::DepthBins) {
        report.depth_bins = Some(make_pct_by_depth_bin(&shots, cfg.depth_bin_width_in, cfg.depth_argmax_min_n)?);
    }
    let need_effects = analyses.contains(&Analysis::Fig5) || analyses.contains(&Analysis::SplitHalf);
    if need_effects {
        let full = crate::pipeline::effects_dataset(records);
        let mut filtered = crate::effects::apply_min_shots_filter_for(&full, cfg.effects.min_shots, cfg.model_kind);
        if cfg.model_kind == ModelKind::Defender {
            filtered = filtered.largest_connected_block();
        }
        if analyses.contains(&Analysis::Fig5) {
            let reference = fit_effects(&filtered, cfg.model_kind, ResponseKind::Raw, cfg.effects.resilience_variant)?;
            for response in [ResponseKind::Raw, ResponseKind::Prob] {
                report.mse.extend(subsample_mse(&filtered, &cfg.subsample, cfg.model_kind, response, &cfg.effects, &reference)?);
            }
        }
        if analyses.contains(&Analysis::SplitHalf) {
            for response in [ResponseKind::Raw, ResponseKind::Prob] {
                report.split_half.push(split_half_rank_correlation(&filtered, cfg.model_kind, response, &cfg.effects)?);
            }
        }
    }
    Ok(report)
}

impl EvalReport {
    /// Write one CSV per populated analysis plus a JSON summary; returns the
    /// paths written, in a fixed order.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
        let mut written = Vec::new();
        let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<(), IoError>| -> Result<(), IoError> {
            let p = dir.join(name);
            f(&p)?;
            written.push(p);
            Ok(())
        };
        if !self.variance.is_empty() {
            put(FIG3_FILE, &|p| write_csv(p, &self.variance))?;
        }
        if !self.profiles.is_empty() {
            let rows: Vec<&ProfileBin> = self.profiles.iter().flat_map(|p| &p.bins).collect();
            put(FIG4_FILE, &|p| write_csv(p, &rows))?;
        }
        if !self.mse.is_empty() {
            put(FIG5_FILE, &|p| write_csv(p, &self.mse))?;
        }
        if let Some(d) = &self.depth_bins {
            put(DEPTH_BINS_FILE, &|p| write_csv(p, &d.bins))?;
        }
        if !self.split_half.is_empty() {
            put(SPLIT_HALF_FILE, &|p| write_csv(p, &self.split_half))?;
        }
        put(SUMMARY_FILE, &|p| write_json(p, &self.summary()))?;
        Ok(written)
    }

    /// Scalars worth a glance without opening the tables.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "variance_ratios": self.variance.iter().map(|r| serde_json::json!({
                "factor": r.factor, "ratio": r.ratio, "ci": [r.ci_low, r.ci_high],
                "n_contested": r.n_contested, "n_open": r.n_open,
            })).collect::<Vec<_>>(),
            "profile_trends": self.profiles.iter().map(|p| serde_json::json!({
                "bin_by": p.bin_by, "value": p.value, "trend": p.trend,
            })).collect::<Vec<_>>(),
            "depth_argmax_in": self.depth_bins.as_ref().and_then(|d| d.argmax_in),
            "split_half": self.split_half.iter().map(|s| serde_json::json!({
                "response": s.response, "rho": s.rho, "n_players": s.n_players,
            })).collect::<Vec<_>>(),
        })
    }
}
