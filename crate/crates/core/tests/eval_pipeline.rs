//! The analyses run on a small simulated season, end to end.

use shotarc::eval::{evaluate, Analysis, EvalConfig, SubsampleSpec, DEPTH_BINS_FILE, FIG3_FILE, FIG4_FILE, FIG5_FILE};
use shotarc::makeprob::{train, TrainConfig};
use shotarc::pipeline::{apply_model, fit_tracking, FactorRecord, FitConfig};
use shotarc::sim::{simulate_season, SimConfig};
use shotarc::CourtGeometry;

fn records() -> Vec<FactorRecord> {
    let season = simulate_season(&SimConfig { n_games: 24, shots_per_game: 200, ..SimConfig::default() }).unwrap();
    let out = fit_tracking(&season.tracking(), &season.tags(), &season.roster(), &FitConfig::default(), &CourtGeometry::default()).unwrap();
    let mut recs = out.factors;
    let f: Vec<_> = recs.iter().map(|r| r.factors()).collect();
    let m: Vec<_> = recs.iter().map(|r| r.is_make()).collect();
    let model = train(&f, &m, &TrainConfig::default()).unwrap();
    apply_model(&mut recs, &model);
    recs
}

fn config() -> EvalConfig {
    let mut cfg = EvalConfig { subsample: SubsampleSpec { n_replicates: 4, ..Default::default() }, ..Default::default() };
    cfg.variance.n_bootstrap = 100;
    cfg.effects.min_shots = 20;
    cfg
}

#[test]
fn every_analysis_runs_and_writes_its_table() {
    let recs = records();
    let report = evaluate(&recs, &Analysis::ALL, &config()).unwrap();
    assert_eq!(report.variance.len(), 2);
    assert_eq!(report.profiles.len(), 4);
    assert_eq!(report.mse.len(), 10);
    assert_eq!(report.split_half.len(), 2);
    assert!(report.profiles.iter().flat_map(|p| &p.bins).all(|b| b.n == 0 || b.mean.is_some()));
    // Pressure pushes contested shots short, so depth rises with NDD.
    let depth_vs_ndd = report.profiles.iter().find(|p| p.bin_by == shotarc::eval::BinBy::Ndd && p.value == shotarc::eval::ProfileValue::Depth).unwrap();
    assert!(depth_vs_ndd.trend.unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let written = report.write_dir(dir.path()).unwrap();
    for f in [FIG3_FILE, FIG4_FILE, FIG5_FILE, DEPTH_BINS_FILE] {
        assert!(written.contains(&dir.path().join(f)), "{f} missing");
    }
    let fig5 = std::fs::read_to_string(dir.path().join(FIG5_FILE)).unwrap();
    assert_eq!(fig5.lines().count(), 11);
}

#[test]
fn analyses_ignore_row_order_and_repeat_exactly() {
    let recs = records();
    let cfg = config();
    let analyses = [Analysis::Fig3, Analysis::Fig4, Analysis::DepthBins, Analysis::Fig5];
    let a = evaluate(&recs, &analyses, &cfg).unwrap();
    let b = evaluate(&recs, &analyses, &cfg).unwrap();
    assert_eq!(a, b);
    let mut shuffled = recs.clone();
    shuffled.reverse();
    shuffled.rotate_left(recs.len() / 3);
    assert_eq!(evaluate(&shuffled, &analyses, &cfg).unwrap(), a);
}
