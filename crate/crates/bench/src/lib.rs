//! Shared fixtures for the pipeline benchmarks. Everything is seeded, so
//! each bench sees the same inputs run to run.

use shotarc::ingest::{extract_shot_events, ExtractConfig, ShotEvent};
use shotarc::pipeline::{fit_events, FactorRecord, FitConfig};
use shotarc::sim::{simulate_season, SimConfig, SimSeason};
use shotarc::CourtGeometry;

/// A small default-shaped season.
pub fn season(n_games: usize, shots_per_game: usize) -> SimSeason {
    let cfg = SimConfig { n_games, shots_per_game, seed: 7, ..SimConfig::default() };
    simulate_season(&cfg).expect("default simulator settings are valid")
}

/// Extracted shot events, ready for fitting.
pub fn events(season: &SimSeason) -> Vec<ShotEvent> {
    let geometry = CourtGeometry::default();
    extract_shot_events(&season.tracking(), &season.tags(), &season.roster(), &geometry, &ExtractConfig::default())
        .expect("simulated tracking extracts cleanly")
        .events
}

/// Retained factor rows with modeled probabilities taken from the truth
/// make rate, so effect fits can run on either response.
pub fn factor_records(season: &SimSeason) -> Vec<FactorRecord> {
    let out = fit_events(&events(season), &FitConfig::default(), &CourtGeometry::default());
    let rate = out.factors.iter().map(|r| f64::from(r.made)).sum::<f64>() / out.factors.len().max(1) as f64;
    out.factors.into_iter().map(|r| FactorRecord { prob: Some(rate), ..r }).collect()
}
