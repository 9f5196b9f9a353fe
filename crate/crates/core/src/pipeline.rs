//! Composition of ingest, trajectory fitting, filtering and factor
//! extraction, plus the per-shot record types that flow between stages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{EffectRow, EffectsDataset};
use crate::factors::{fit_path_line, rim_plane_crossing, factors_from_crossing, FactorError};
use crate::geometry::{CourtGeometry, GameId, PlayerId, ShotFactors};
use crate::ingest::{
    extract_game_shots, load_events, load_roster, EventTag, ExtractConfig, GameStream, IngestError, LoadOptions,
    LoadReport, Roster, ShotEvent, TrackingFormat, TrackingFrame,
};
use crate::makeprob::MakeProbModel;
use crate::trajectory::{
    fit_trajectory, rejection_reason, FilterReport, FilterThresholds, FitCandidate, FittedTrajectory, RejectReason,
    TrajectoryConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0} event(s) reference games with no tracking frames (first: {1})")]
    MissingGames(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub load: LoadOptions,
    pub extract: ExtractConfig,
    pub trajectory: TrajectoryConfig,
    pub filter: FilterThresholds,
}

/// One retained shot with its factors; the hand-off format between stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub shot_id: String,
    pub game_id: GameId,
    pub shooter_id: PlayerId,
    pub defender_id: PlayerId,
    pub hoop_end: String,
    pub ndd: f64,
    pub defender_height_in: f64,
    pub contest_angle_deg: Option<f64>,
    pub made: u8,
    pub depth_ft: f64,
    pub lr_ft: f64,
    pub angle_deg: f64,
    pub rmse: f64,
    pub n_samples: usize,
    /// Semicolon-separated notes; empty when nothing is unusual.
    pub flags: String,
    /// Modeled make probability, once a model has been applied.
    pub prob: Option<f64>,
}

impl FactorRecord {
    pub fn factors(&self) -> ShotFactors {
        ShotFactors { depth: self.depth_ft, left_right: self.lr_ft, entry_angle: self.angle_deg }
    }

    pub fn is_make(&self) -> bool {
        self.made == 1
    }
}

/// Posterior summary for every shot that reached the fitting stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub shot_id: String,
    pub status: String,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta3: Option<f64>,
    pub beta4: Option<f64>,
    pub beta5: Option<f64>,
    pub rmse: Option<f64>,
    pub n_samples: usize,
    pub max_gap_s: f64,
    pub condition_number: Option<f64>,
    pub posterior_a: Option<f64>,
    pub posterior_b: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProcessedShot {
    pub trajectory: TrajectoryRecord,
    pub factors: Result<FactorRecord, RejectReason>,
}

fn trajectory_record(event: &ShotEvent, max_gap: f64, fit: Option<&FittedTrajectory>, status: &str) -> TrajectoryRecord {
    let b = |k: usize| fit.map(|f| f.beta[k]);
    TrajectoryRecord {
        shot_id: event.shot_id.clone(),
        status: status.to_string(),
        beta0: b(0),
        beta1: b(1),
        beta2: b(2),
        beta3: b(3),
        beta4: b(4),
        beta5: b(5),
        rmse: fit.map(|f| f.rmse),
        n_samples: event.samples.len(),
        max_gap_s: max_gap,
        condition_number: fit.map(|f| f.condition_number),
        posterior_a: fit.map(|f| f.posterior_a),
        posterior_b: fit.map(|f| f.posterior_b),
    }
}

/// Fit, filter and extract factors for one shot.
pub fn process_shot(event: &ShotEvent, cfg: &FitConfig, geometry: &CourtGeometry) -> ProcessedShot {
    let max_gap = event.max_gap();
    let fit = fit_trajectory(&event.samples, event.shooter_xy, &cfg.trajectory, geometry);
    let candidate = FitCandidate { n_samples: event.samples.len(), max_gap, fit };
    if let Some(reason) = rejection_reason(&candidate, &cfg.filter) {
        let fit = candidate.fit.as_ref().ok();
        return ProcessedShot { trajectory: trajectory_record(event, max_gap, fit, reason.as_str()), factors: Err(reason) };
    }
    let fitted = candidate.fit.expect("filter passed only on successful fits");
    let factors = fit_path_line(&event.samples, geometry)
        .map_err(|_| RejectReason::DegenerateCrossing)
        .and_then(|path| {
            rim_plane_crossing(&fitted, &path, geometry)
                .map(|c| factors_from_crossing(&c, &path, geometry))
                .map_err(|e| match e {
                    FactorError::NoCrossing => RejectReason::NoCrossing,
                    _ => RejectReason::DegenerateCrossing,
                })
        });
    let status = match &factors {
        Ok(_) => "ok",
        Err(r) => r.as_str(),
    };
    let trajectory = trajectory_record(event, max_gap, Some(&fitted), status);
    let factors = factors.map(|f| {
        let mut flags = Vec::new();
        if event.contest_angle.is_none() {
            flags.push("contest_angle_undefined");
        }
        FactorRecord {
            shot_id: event.shot_id.clone(),
            game_id: event.game_id.clone(),
            shooter_id: event.shooter.clone(),
            defender_id: event.defender.clone(),
            hoop_end: event.hoop_end.to_string(),
            ndd: event.ndd,
            defender_height_in: event.defender_height,
            contest_angle_deg: event.contest_angle,
            made: u8::from(event.outcome.is_make()),
            depth_ft: f.depth,
            lr_ft: f.left_right,
            angle_deg: f.entry_angle,
            rmse: fitted.rmse,
            n_samples: event.samples.len(),
            flags: flags.join(";"),
            prob: None,
        }
    });
    ProcessedShot { trajectory, factors }
}

/// Output of the fitting stage, in canonical `shot_id` order.
#[derive(Debug, Clone, Default)]
pub struct FitOutput {
    pub factors: Vec<FactorRecord>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub report: FilterReport,
    pub tracking_report: LoadReport,
    pub events_report: LoadReport,
    pub roster_report: LoadReport,
}

impl FitOutput {
    fn absorb(&mut self, processed: Vec<ProcessedShot>) {
        for p in processed {
            self.report.total += 1;
            match p.factors {
                Ok(f) => {
                    self.report.retained += 1;
                    self.factors.push(f);
                }
                Err(r) => self.report.reject(r),
            }
            self.trajectories.push(p.trajectory);
        }
    }

    fn reject_before_fit(&mut self, rejected: &[(String, RejectReason)]) {
        for (_, r) in rejected {
            self.report.total += 1;
            self.report.reject(*r);
        }
    }

    fn finish(&mut self) {
        self.factors.sort_by(|a, b| a.shot_id.cmp(&b.shot_id));
        self.trajectories.sort_by(|a, b| a.shot_id.cmp(&b.shot_id));
    }
}

/// Fit already assembled events (parallel over shots, ordered output).
pub fn fit_events(events: &[ShotEvent], cfg: &FitConfig, geometry: &CourtGeometry) -> FitOutput {
    let mut out = FitOutput::default();
    out.absorb(events.par_iter().map(|e| process_shot(e, cfg, geometry)).collect());
    out.finish();
    out
}

/// Extract and fit every tagged shot of in-memory tracking data.
pub fn fit_tracking(
    games: &BTreeMap<GameId, Vec<TrackingFrame>>,
    tags: &[EventTag],
    roster: &Roster,
    cfg: &FitConfig,
    geometry: &CourtGeometry,
) -> Result<FitOutput, PipelineError> {
    check_games(tags, &games.keys().cloned().collect())?;
    let by_game = crate::ingest::tags_by_game(tags);
    let mut out = FitOutput::default();
    for (game, frames) in games {
        if let Some(t) = by_game.get(game) {
            fit_one_game(&mut out, frames, t, roster, cfg, geometry)?;
        }
    }
    out.finish();
    Ok(out)
}

fn check_games(tags: &[EventTag], games: &BTreeSet<GameId>) -> Result<(), PipelineError> {
    let missing: Vec<&EventTag> = tags.iter().filter(|t| !games.contains(&t.game_id)).collect();
    match missing.first() {
        Some(first) => Err(PipelineError::MissingGames(missing.len(), first.game_id.to_string())),
        None => Ok(()),
    }
}

fn fit_one_game(
    out: &mut FitOutput,
    frames: &[TrackingFrame],
    tags: &[&EventTag],
    roster: &Roster,
    cfg: &FitConfig,
    geometry: &CourtGeometry,
) -> Result<(), PipelineError> {
    let extraction = extract_game_shots(frames, tags, roster, geometry, &cfg.extract)?;
    out.reject_before_fit(&extraction.rejected);
    out.absorb(extraction.events.par_iter().map(|e| process_shot(e, cfg, geometry)).collect());
    Ok(())
}

/// Stream a tracking file game by game and fit every tagged shot.
pub fn fit_files(
    tracking: &Path,
    format: TrackingFormat,
    events: &Path,
    roster: &Path,
    cfg: &FitConfig,
    geometry: &CourtGeometry,
) -> Result<FitOutput, PipelineError> {
    let (tags, events_report) = load_events(events)?;
    let (roster, roster_report) = load_roster(roster)?;
    let by_game: HashMap<GameId, Vec<&EventTag>> = crate::ingest::tags_by_game(&tags);
    let mut seen = BTreeSet::new();
    let mut out = FitOutput { events_report, roster_report, ..FitOutput::default() };
    let mut stream = GameStream::open(tracking, format, cfg.load)?;
    for game in stream.by_ref() {
        let (game, frames) = game?;
        if let Some(t) = by_game.get(&game) {
            fit_one_game(&mut out, &frames, t, &roster, cfg, geometry)?;
        }
        seen.insert(game);
    }
    out.tracking_report = stream.report().clone();
    check_games(&tags, &seen)?;
    out.finish();
    Ok(out)
}

/// Fill in `prob` for every record.
pub fn apply_model(records: &mut [FactorRecord], model: &MakeProbModel) {
    records.par_iter_mut().for_each(|r| r.prob = Some(model.predict(&r.factors())));
}

/// Rows for the effect regressions.
pub fn effects_dataset(records: &[FactorRecord]) -> EffectsDataset {
    EffectsDataset::new(
        records
            .iter()
            .map(|r| EffectRow {
                shot_id: r.shot_id.clone(),
                game_id: r.game_id.clone(),
                shooter: r.shooter_id.clone(),
                defender: r.defender_id.clone(),
                ndd: r.ndd,
                outcome: f64::from(r.made),
                prob: r.prob,
            })
            .collect(),
    )
}

/// Deterministic split by game: every `k`-th game (in id order, starting at
/// `offset`) goes to validation.
pub fn split_by_game(records: &[FactorRecord], k: usize, offset: usize) -> (Vec<FactorRecord>, Vec<FactorRecord>) {
    let games: BTreeSet<&GameId> = records.iter().map(|r| &r.game_id).collect();
    let held: BTreeSet<&GameId> =
        games.into_iter().enumerate().filter(|(i, _)| k > 0 && i % k == offset % k).map(|(_, g)| g).collect();
    let (valid, train): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| held.contains(&r.game_id));
    (train, valid)
}
