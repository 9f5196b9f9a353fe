//! Synthetic seasons with planted shooter skills, defender effects and
//! contest pressure.
//!
//! Each shot is built backwards from its rim-plane crossing: sample depth,
//! left-right and entry angle from the shooter's pressure-perturbed
//! distribution, solve for the drag-free parabola from the release point
//! through that crossing, then sample it at 25 Hz. Outcomes come from a
//! deterministic clean-entry rule, so every make/miss is auditable.
//!
//! Randomness: one ChaCha8 key derived from the seed. Stream 0 draws the
//! league (skills, heights, planted effects); stream `g + 1` draws game `g`.
//! Games are therefore independent of each other and of generation order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    court_xy_to_local, local_xy_to_court, right_of, to_court_frame, CourtGeometry, GameId, HoopEnd, PlayerId, ShotFactors, Xy, Xyz,
};
use crate::ingest::{EventTag, Outcome, PlayerPosition, RosterRecord, TrackingFrame};
use crate::io;

pub const FRAME_RATE: f64 = 25.0;
/// Gravitational acceleration, ft/s².
pub const GRAVITY: f64 = 32.174;
const POST_CROSSING_FRAMES: usize = 3;
const SHOT_SPACING_S: f64 = 30.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("target crossing unreachable: {0}")]
    Unreachable(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Write(#[from] io::IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShooterPool {
    /// League mean of shooters' aimed depth, ft past the front rim.
    pub depth_mean: f64,
    /// Spread of aimed depth across shooters.
    pub depth_mean_sd: f64,
    pub depth_sd: f64,
    pub depth_sd_spread: f64,
    pub lr_sd: f64,
    pub lr_sd_spread: f64,
    pub angle_mean: f64,
    pub angle_mean_sd: f64,
    pub angle_sd: f64,
    /// Per-shot correlation between depth and entry angle.
    pub depth_angle_corr: f64,
    /// Multiplier on pressure-induced depth shift (1 = league average).
    pub sensitivity_mean: f64,
    pub sensitivity_sd: f64,
}

impl Default for ShooterPool {
    fn default() -> Self {
        Self {
            depth_mean: 0.75,
            depth_mean_sd: 0.03,
            depth_sd: 0.2,
            depth_sd_spread: 0.02,
            lr_sd: 0.2,
            lr_sd_spread: 0.02,
            angle_mean: 45.0,
            angle_mean_sd: 1.5,
            angle_sd: 3.0,
            depth_angle_corr: 0.0,
            sensitivity_mean: 1.0,
            sensitivity_sd: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenderPool {
    /// Spread of each defender's extra depth shift under full pressure, ft.
    pub depth_bias_sd: f64,
    pub height_min_in: f64,
    pub height_max_in: f64,
}

impl Default for DefenderPool {
    fn default() -> Self {
        Self { depth_bias_sd: 0.06, height_min_in: 72.0, height_max_in: 84.0 }
    }
}

/// How contest pressure perturbs the crossing distribution. Pressure is a
/// logistic ramp in NDD: about 1 inside 4 ft, about 0 beyond 6 ft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureConfig {
    pub ramp_center: f64,
    pub ramp_scale: f64,
    /// Depth variance multiplier at full pressure.
    pub depth_var_inflation: f64,
    pub lr_var_inflation: f64,
    /// League-average depth shift at full pressure, ft (negative = short).
    pub depth_shift: f64,
    /// Entry-angle increase at full pressure, degrees.
    pub angle_shift: f64,
    /// Extra entry angle per inch of defender height above `reference_height_in`.
    pub angle_per_inch: f64,
    pub reference_height_in: f64,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self {
            ramp_center: 5.0,
            ramp_scale: 0.25,
            depth_var_inflation: 1.56,
            lr_var_inflation: 1.38,
            depth_shift: -0.10,
            angle_shift: 1.5,
            angle_per_inch: 0.2,
            reference_height_in: 78.0,
        }
    }
}

impl PressureConfig {
    /// No pressure effects at all.
    pub fn none() -> Self {
        Self {
            depth_var_inflation: 1.0,
            lr_var_inflation: 1.0,
            depth_shift: 0.0,
            angle_shift: 0.0,
            angle_per_inch: 0.0,
            ..Self::default()
        }
    }

    pub fn pressure(&self, ndd: f64) -> f64 {
        1.0 / (1.0 + ((ndd - self.ramp_center) / self.ramp_scale).exp())
    }
}

/// One uniform NDD component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NddBand {
    pub min: f64,
    pub max: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NddMixture {
    pub contested: NddBand,
    pub mid: NddBand,
    pub open: NddBand,
}

impl Default for NddMixture {
    fn default() -> Self {
        Self {
            contested: NddBand { min: 1.5, max: 4.0, weight: 0.4 },
            mid: NddBand { min: 4.0, max: 6.0, weight: 0.2 },
            open: NddBand { min: 6.0, max: 12.0, weight: 0.4 },
        }
    }
}

impl NddMixture {
    fn bands(&self) -> [NddBand; 3] {
        [self.contested, self.mid, self.open]
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let bands = self.bands();
        let total: f64 = bands.iter().map(|b| b.weight).sum();
        let mut u = rng.random::<f64>() * total;
        for b in bands {
            if u < b.weight {
                return rng.random_range(b.min..=b.max);
            }
            u -= b.weight;
        }
        let b = self.open;
        rng.random_range(b.min..=b.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_games: usize,
    pub shots_per_game: usize,
    pub n_teams: usize,
    pub players_per_team: usize,
    /// Per-frame isotropic ball tracking noise, ft.
    pub noise_sd: f64,
    pub release_height: f64,
    /// Ball coordinates are rounded to this quantum (a power of ten); 0 keeps
    /// full precision.
    pub ball_quantum: f64,
    /// Fraction of shots with corrupted tracking (gaps, glitches, heavy
    /// noise, truncation).
    pub corruption_rate: f64,
    pub shooters: ShooterPool,
    pub defenders: DefenderPool,
    pub pressure: PressureConfig,
    pub ndd: NddMixture,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 20150101,
            n_games: 125,
            shots_per_game: 400,
            n_teams: 6,
            players_per_team: 8,
            noise_sd: 0.05,
            release_height: 7.0,
            ball_quantum: 1e-4,
            corruption_rate: 0.10,
            shooters: ShooterPool::default(),
            defenders: DefenderPool::default(),
            pressure: PressureConfig::default(),
            ndd: NddMixture::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        let s = &self.shooters;
        let p = &self.pressure;
        if self.n_games == 0 || self.shots_per_game == 0 {
            return bad("n_games and shots_per_game must be positive");
        }
        if self.n_teams < 2 || self.players_per_team < 5 {
            return bad("need at least 2 teams of at least 5 players");
        }
        if !(self.noise_sd >= 0.0) || !(self.release_height > 0.0 && self.release_height < 10.0) {
            return bad("noise_sd must be >= 0 and release_height in (0, 10)");
        }
        if !(self.ball_quantum >= 0.0) {
            return bad("ball_quantum must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return bad("corruption_rate must lie in [0, 1]");
        }
        let sds = [
            s.depth_mean_sd, s.depth_sd, s.depth_sd_spread, s.lr_sd, s.lr_sd_spread, s.angle_mean_sd, s.angle_sd,
            s.sensitivity_sd, self.defenders.depth_bias_sd,
        ];
        if sds.iter().any(|v| !(*v >= 0.0)) {
            return bad("standard deviations must be non-negative");
        }
        if !(s.depth_angle_corr.abs() <= 1.0) {
            return bad("depth_angle_corr must lie in [-1, 1] (covariance must be positive semidefinite)");
        }
        if !(p.depth_var_inflation >= 1.0 && p.lr_var_inflation >= 1.0) {
            return bad("variance inflation factors must be >= 1");
        }
        if !(p.ramp_scale > 0.0) {
            return bad("pressure ramp_scale must be positive");
        }
        if !(s.angle_mean > 0.0 && s.angle_mean < 90.0) {
            return bad("angle_mean must lie in (0, 90)");
        }
        let d = &self.defenders;
        if !(d.height_min_in > 0.0 && d.height_min_in <= d.height_max_in) {
            return bad("defender height range is empty");
        }
        for b in self.ndd.bands() {
            if !(b.min > 0.0 && b.min <= b.max && b.weight >= 0.0) {
                return bad("ndd bands need 0 < min <= max and weight >= 0");
            }
        }
        if self.ndd.bands().iter().map(|b| b.weight).sum::<f64>() <= 0.0 {
            return bad("ndd band weights sum to zero");
        }
        if self.ball_quantum > 0.0 {
            let inv = 1.0 / self.ball_quantum;
            if (inv - inv.round()).abs() > 1e-6 * inv {
                return bad("ball_quantum must be 1/k for an integer k (e.g. 0.0001)");
            }
        }
        Ok(())
    }

    pub fn total_shots(&self) -> usize {
        self.n_games * self.shots_per_game
    }
}

/// Planted per-player parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlayer {
    pub id: PlayerId,
    pub team: String,
    pub height_in: f64,
    pub position: String,
    pub depth_mean: f64,
    pub depth_sd: f64,
    pub lr_sd: f64,
    pub angle_mean: f64,
    pub sensitivity: f64,
    /// Extra depth shift this player induces as nearest defender under full
    /// pressure (negative = pushes shots shorter = better defense).
    pub defender_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct League {
    pub players: Vec<SimPlayer>,
    /// Player indices per team.
    pub teams: Vec<Vec<usize>>,
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated non-negative sd")
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl League {
    pub fn generate(cfg: &SimConfig) -> Self {
        let mut rng = rng_for(cfg.seed, 0);
        let s = &cfg.shooters;
        let width = (cfg.n_teams * cfg.players_per_team).to_string().len().max(2);
        let mut players = Vec::new();
        let mut teams = Vec::new();
        for t in 0..cfg.n_teams {
            let mut members = Vec::new();
            for k in 0..cfg.players_per_team {
                let n = players.len() + 1;
                let height = rng.random_range(cfg.defenders.height_min_in..=cfg.defenders.height_max_in);
                let position = match k % 3 {
                    0 => "G",
                    1 => "F",
                    _ => "C",
                };
                players.push(SimPlayer {
                    id: PlayerId::new(format!("P{n:0width$}")).expect("non-empty"),
                    team: format!("T{}", t + 1),
                    height_in: (height * 10.0).round() / 10.0,
                    position: position.to_string(),
                    depth_mean: normal(s.depth_mean, s.depth_mean_sd).sample(&mut rng),
                    depth_sd: normal(s.depth_sd, s.depth_sd_spread).sample(&mut rng).max(0.25 * s.depth_sd),
                    lr_sd: normal(s.lr_sd, s.lr_sd_spread).sample(&mut rng).max(0.25 * s.lr_sd),
                    angle_mean: normal(s.angle_mean, s.angle_mean_sd).sample(&mut rng),
                    sensitivity: normal(s.sensitivity_mean, s.sensitivity_sd).sample(&mut rng),
                    defender_bias: normal(0.0, cfg.defenders.depth_bias_sd).sample(&mut rng),
                });
                members.push(n - 1);
            }
            teams.push(members);
        }
        League { players, teams }
    }

    pub fn roster(&self) -> Vec<RosterRecord> {
        self.players
            .iter()
            .map(|p| RosterRecord { player: p.id.clone(), height_in: p.height_in, position: p.position.clone() })
            .collect()
    }

    /// Round-robin pairing for game `g`.
    pub fn matchup(&self, g: usize) -> (usize, usize) {
        let n = self.teams.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        pairs[g % pairs.len()]
    }
}

/// Release position (rim-local frame) and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseState {
    pub xy: Xy,
    pub height: f64,
}

/// Drag-free parabola in the vertical plane through the release point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPlan {
    pub release: ReleaseState,
    /// Unit horizontal direction of travel.
    pub direction: Xy,
    /// Path coordinate of the rim-plane crossing.
    pub s_cross: f64,
    /// `z(s) = h + b s + a s²`.
    pub a: f64,
    pub b: f64,
    /// Horizontal speed, ft/s.
    pub v_h: f64,
}

impl TrajectoryPlan {
    /// Solve for the parabola from `release` that crosses rim height with the
    /// target depth, left-right offset and entry angle.
    pub fn solve(release: ReleaseState, target: &ShotFactors, geometry: &CourtGeometry) -> Result<Self, SimError> {
        let to_rim = geometry.rim_xy() - release.xy;
        let dist = to_rim.norm();
        if !(dist > geometry.rim_radius) {
            return Err(SimError::Unreachable("release point is over the rim".into()));
        }
        if !(target.left_right.abs() < dist) {
            return Err(SimError::Unreachable("left-right offset exceeds release distance".into()));
        }
        if !(target.entry_angle > 0.0 && target.entry_angle < 90.0) {
            return Err(SimError::Unreachable(format!("entry angle {} outside (0, 90)", target.entry_angle)));
        }
        if !(release.height < geometry.rim_height()) {
            return Err(SimError::Unreachable("release must be below rim height".into()));
        }
        let u0 = to_rim / dist;
        let delta = (target.left_right / dist).asin();
        let direction = u0 * delta.cos() + right_of(u0) * delta.sin();
        let s_cross = dist * delta.cos() - geometry.rim_radius + target.depth;
        if !(s_cross > 0.0) {
            return Err(SimError::Unreachable("crossing lies behind the release point".into()));
        }
        let tan = target.entry_angle.to_radians().tan();
        let a = (release.height - geometry.rim_height() - s_cross * tan) / (s_cross * s_cross);
        let b = -tan - 2.0 * a * s_cross;
        let v_h = (-GRAVITY / (2.0 * a)).sqrt();
        Ok(TrajectoryPlan { release, direction, s_cross, a, b, v_h })
    }

    pub fn flight_time(&self) -> f64 {
        self.s_cross / self.v_h
    }

    /// Number of in-flight frames: flight time × frame rate, rounded.
    pub fn n_flight_samples(&self, fps: f64) -> usize {
        (self.flight_time() * fps).round() as usize
    }

    pub fn position_at(&self, t: f64) -> Xyz {
        let s = self.v_h * t;
        let xy = self.release.xy + self.direction * s;
        Xyz::new(xy.x, xy.y, self.release.height + self.b * s + self.a * s * s)
    }
}

/// In-flight ball samples at `fps` with isotropic Gaussian noise.
pub fn sample_trajectory(
    release: ReleaseState,
    target: &ShotFactors,
    geometry: &CourtGeometry,
    fps: f64,
    noise_sd: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Xyz>, SimError> {
    let plan = TrajectoryPlan::solve(release, target, geometry)?;
    let noise = normal(0.0, noise_sd.max(0.0));
    Ok((0..plan.n_flight_samples(fps))
        .map(|k| {
            let p = plan.position_at(k as f64 / fps);
            if noise_sd > 0.0 {
                p + Xyz::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
            } else {
                p
            }
        })
        .collect())
}

/// Clean entry: the crossing point, offset from the rim center by
/// `(depth − rim_radius, lr)`, lies within `rim_radius − ball_radius / sin(angle)`.
pub fn physical_make_oracle(depth: f64, lr: f64, entry_angle: f64, geometry: &CourtGeometry) -> bool {
    let clearance = geometry.rim_radius - geometry.ball_radius / entry_angle.to_radians().sin();
    (depth - geometry.rim_radius).hypot(lr) <= clearance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    None,
    /// Several consecutive frames dropped mid-flight.
    Gap,
    /// Heavy vertical noise on every frame.
    Noise,
    /// A few frames with the ball teleported far off the arc.
    Glitch,
    /// Tracking lost shortly after release.
    Partial,
}

/// One ground-truth row per emitted shot. Positions in the rim-local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub shot_id: String,
    pub game_id: String,
    pub shooter_id: String,
    pub defender_id: String,
    pub hoop_end: String,
    pub release_x: f64,
    pub release_y: f64,
    pub release_z: f64,
    pub ndd: f64,
    pub pressure: f64,
    pub depth: f64,
    pub lr: f64,
    pub angle: f64,
    pub made: u8,
    pub corruption: Corruption,
    pub defender_bias: f64,
    pub shooter_sensitivity: f64,
}

impl GroundTruthRecord {
    pub fn factors(&self) -> ShotFactors {
        ShotFactors { depth: self.depth, left_right: self.lr, entry_angle: self.angle }
    }
}

/// Everything generated for one game.
#[derive(Debug, Clone, Default)]
pub struct GameOutput {
    pub frames: Vec<TrackingFrame>,
    pub tags: Vec<EventTag>,
    pub truth: Vec<GroundTruthRecord>,
}

fn round_to(x: f64, inv_quantum: f64) -> f64 {
    if inv_quantum > 0.0 {
        (x * inv_quantum).round() / inv_quantum
    } else {
        x
    }
}

const LOCAL_X_RANGE: (f64, f64) = (-4.0, 40.0);
const LOCAL_Y_RANGE: (f64, f64) = (-24.5, 24.5);

fn in_local_bounds(p: Xy) -> bool {
    (LOCAL_X_RANGE.0..=LOCAL_X_RANGE.1).contains(&p.x) && (LOCAL_Y_RANGE.0..=LOCAL_Y_RANGE.1).contains(&p.y)
}

/// Point at distance `r` from `origin`, retrying random bearings until it lands
/// inside the court region (falls back to the clamped last try).
fn place_around(origin: Xy, r: f64, bearing: impl Fn(&mut ChaCha8Rng) -> Xy, rng: &mut ChaCha8Rng) -> Xy {
    let mut p = origin;
    for _ in 0..32 {
        p = origin + bearing(rng) * r;
        if in_local_bounds(p) {
            return p;
        }
    }
    Xy::new(p.x.clamp(LOCAL_X_RANGE.0, LOCAL_X_RANGE.1), p.y.clamp(LOCAL_Y_RANGE.0, LOCAL_Y_RANGE.1))
}

fn unit(angle: f64) -> Xy {
    Xy::new(angle.cos(), angle.sin())
}

fn pick_distinct(rng: &mut ChaCha8Rng, pool: &[usize], exclude: usize, k: usize) -> Vec<usize> {
    let mut rest: Vec<usize> = pool.iter().copied().filter(|&p| p != exclude).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(rest.len()) {
        let i = rng.random_range(0..rest.len());
        out.push(rest.swap_remove(i));
    }
    out
}

pub fn game_id(cfg: &SimConfig, g: usize) -> GameId {
    let width = cfg.n_games.to_string().len().max(4);
    GameId::new(format!("G{:0width$}", g + 1)).expect("non-empty")
}

/// Generate game `g` from its own random stream.
pub fn generate_game(league: &League, cfg: &SimConfig, geometry: &CourtGeometry, g: usize) -> GameOutput {
    let mut rng = rng_for(cfg.seed, g as u64 + 1);
    let gid = game_id(cfg, g);
    let (home, away) = league.matchup(g);
    let inv_q = if cfg.ball_quantum > 0.0 { (1.0 / cfg.ball_quantum).round() } else { 0.0 };
    let std = normal(0.0, 1.0);
    let noise = normal(0.0, cfg.noise_sd);
    let shot_width = cfg.shots_per_game.to_string().len().max(4);
    let mut out = GameOutput::default();

    for k in 0..cfg.shots_per_game {
        let (off, def) = if rng.random::<bool>() { (home, away) } else { (away, home) };
        let shooter_i = league.teams[off][rng.random_range(0..league.teams[off].len())];
        let defender_i = league.teams[def][rng.random_range(0..league.teams[def].len())];
        let shooter = &league.players[shooter_i];
        let defender = &league.players[defender_i];
        let hoop = if rng.random::<bool>() { HoopEnd::Left } else { HoopEnd::Right };

        // Shooter on the three-point line region, facing the rim.
        let phi = rng.random_range(-80f64..=80.0).to_radians();
        let radius = if phi.abs() > 68f64.to_radians() { rng.random_range(22.0..23.5) } else { rng.random_range(23.75..26.0) };
        let shooter_raw = unit(phi) * radius;
        let facing = (geometry.rim_xy() - shooter_raw).normalize();

        let planned_ndd = cfg.ndd.sample(&mut rng);
        let defender_raw = place_around(
            shooter_raw,
            planned_ndd,
            |r| {
                // Contest bearing within ±90° of the rim direction; positive to the shooter's right.
                let psi = r.random_range(-90f64..=90.0).to_radians();
                facing * psi.cos() + right_of(facing) * psi.sin()
            },
            &mut rng,
        );
        let raw_ndd = (defender_raw - shooter_raw).norm();
        let others_def = pick_distinct(&mut rng, &league.teams[def], defender_i, 4);
        let mates = pick_distinct(&mut rng, &league.teams[off], shooter_i, 4);
        let mut local = vec![(shooter_i, shooter_raw), (defender_i, defender_raw)];
        for (list, lo, hi) in [(&others_def, raw_ndd + 1.0, raw_ndd + 15.0), (&mates, 3.0, 25.0)] {
            for &pi in list.iter() {
                let r = rng.random_range(lo..hi);
                let mut p = place_around(shooter_raw, r, |r| unit(r.random_range(0.0..std::f64::consts::TAU)), &mut rng);
                // Clamping near the sideline can pull a help defender inside; push it back out.
                if league.players[pi].team == defender.team && (p - shooter_raw).norm() < raw_ndd + 0.5 {
                    p = shooter_raw + facing * (raw_ndd + 1.0);
                }
                local.push((pi, p));
            }
        }
        // Positions are reported to 0.01 ft in court coordinates.
        let players: Vec<PlayerPosition> = local
            .iter()
            .map(|&(pi, p)| {
                let c = local_xy_to_court(p, hoop);
                let pl = &league.players[pi];
                PlayerPosition { id: pl.id.clone(), team: pl.team.clone(), xy: Xy::new(round_to(c.x, 100.0), round_to(c.y, 100.0)) }
            })
            .collect();
        let shooter_xy = court_xy_to_local(players[0].xy, hoop);
        let ndd = (players[1].xy - players[0].xy).norm();

        // Crossing distribution under pressure.
        let pc = &cfg.pressure;
        let pressure = pc.pressure(ndd);
        let depth_mu = shooter.depth_mean + pressure * shooter.sensitivity * (pc.depth_shift + defender.defender_bias);
        let depth_sd = shooter.depth_sd * (1.0 + (pc.depth_var_inflation - 1.0) * pressure).sqrt();
        let lr_sd = shooter.lr_sd * (1.0 + (pc.lr_var_inflation - 1.0) * pressure).sqrt();
        let angle_mu = shooter.angle_mean
            + pressure * (pc.angle_shift + pc.angle_per_inch * (defender.height_in - pc.reference_height_in));
        let (z1, z2, z3) = (std.sample(&mut rng), std.sample(&mut rng), std.sample(&mut rng));
        let rho = cfg.shooters.depth_angle_corr;
        let target = ShotFactors {
            depth: (depth_mu + depth_sd * z1).clamp(-1.5, 3.0),
            left_right: (lr_sd * z3).clamp(-3.0, 3.0),
            entry_angle: (angle_mu + cfg.shooters.angle_sd * (rho * z1 + (1.0 - rho * rho).sqrt() * z2)).clamp(20.0, 75.0),
        };
        let release = ReleaseState { xy: shooter_xy, height: cfg.release_height };
        let plan = TrajectoryPlan::solve(release, &target, geometry).expect("sampled crossings are always reachable");
        let made = physical_make_oracle(target.depth, target.left_right, target.entry_angle, geometry);

        let corruption = if rng.random::<f64>() < cfg.corruption_rate {
            match rng.random_range(0..4) {
                0 => Corruption::Gap,
                1 => Corruption::Noise,
                2 => Corruption::Glitch,
                _ => Corruption::Partial,
            }
        } else {
            Corruption::None
        };

        let n_flight = plan.n_flight_samples(FRAME_RATE);
        let n_frames = n_flight + POST_CROSSING_FRAMES;
        let mut keep = vec![true; n_frames];
        let mut z_offset = vec![0.0; n_frames];
        match corruption {
            Corruption::None => {}
            Corruption::Gap => {
                let start = (n_flight / 3).max(2);
                for f in keep.iter_mut().skip(start).take(8) {
                    *f = false;
                }
            }
            Corruption::Partial => {
                for f in keep.iter_mut().skip(3) {
                    *f = false;
                }
            }
            Corruption::Noise => {
                let heavy = normal(0.0, 1.2);
                for z in z_offset.iter_mut() {
                    *z = heavy.sample(&mut rng);
                }
            }
            Corruption::Glitch => {
                let lo = n_flight / 3;
                let hi = (2 * n_flight / 3).max(lo + 1);
                for _ in 0..3 {
                    let f = rng.random_range(lo..hi);
                    z_offset[f] = 15.0;
                }
            }
        }

        let start_t = k as f64 * SHOT_SPACING_S;
        let release_frame = out.frames.len();
        for f in 0..n_frames {
            let mut p = plan.position_at(f as f64 / FRAME_RATE);
            if cfg.noise_sd > 0.0 {
                p += Xyz::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            p.z += z_offset[f];
            if !keep[f] {
                continue;
            }
            let c = to_court_frame(p, hoop);
            out.frames.push(TrackingFrame {
                game_id: gid.clone(),
                t: round_to(start_t + f as f64 / FRAME_RATE, 1e4),
                ball: Xyz::new(round_to(c.x, inv_q), round_to(c.y, inv_q), round_to(c.z, inv_q)),
                players: players.clone(),
            });
        }

        let shot_id = format!("{gid}-{:0shot_width$}", k + 1);
        out.tags.push(EventTag {
            shot_id: shot_id.clone(),
            game_id: gid.clone(),
            shooter: shooter.id.clone(),
            release_frame,
            outcome: Outcome::from_flag(made),
            hoop_end: hoop,
        });
        out.truth.push(GroundTruthRecord {
            shot_id,
            game_id: gid.to_string(),
            shooter_id: shooter.id.to_string(),
            defender_id: defender.id.to_string(),
            hoop_end: hoop.to_string(),
            release_x: shooter_xy.x,
            release_y: shooter_xy.y,
            release_z: cfg.release_height,
            ndd,
            pressure,
            depth: target.depth,
            lr: target.left_right,
            angle: target.entry_angle,
            made: u8::from(made),
            corruption,
            defender_bias: defender.defender_bias,
            shooter_sensitivity: shooter.sensitivity,
        });
    }
    out
}

/// A whole season held in memory (for modest sizes and tests).
#[derive(Debug, Clone)]
pub struct SimSeason {
    pub league: League,
    pub games: Vec<GameOutput>,
}

impl SimSeason {
    pub fn tags(&self) -> Vec<EventTag> {
        self.games.iter().flat_map(|g| g.tags.iter().cloned()).collect()
    }

    pub fn truth(&self) -> Vec<GroundTruthRecord> {
        self.games.iter().flat_map(|g| g.truth.iter().cloned()).collect()
    }

    pub fn roster(&self) -> crate::ingest::Roster {
        crate::ingest::Roster::from_records(self.league.roster())
    }

    /// Frames grouped by game, as the loader would return them.
    pub fn tracking(&self) -> std::collections::BTreeMap<GameId, Vec<TrackingFrame>> {
        self.games
            .iter()
            .filter_map(|g| g.frames.first().map(|f| (f.game_id.clone(), g.frames.clone())))
            .collect()
    }
}

pub fn simulate_season(cfg: &SimConfig) -> Result<SimSeason, SimError> {
    cfg.validate()?;
    let geometry = CourtGeometry::default();
    let league = League::generate(cfg);
    let games = (0..cfg.n_games).into_par_iter().map(|g| generate_game(&league, cfg, &geometry, g)).collect();
    Ok(SimSeason { league, games })
}

pub const TRACKING_FILE: &str = "tracking.jsonl";
pub const EVENTS_FILE: &str = "events.csv";
pub const ROSTER_FILE: &str = "roster.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub games: usize,
    pub shots: usize,
    pub frames: usize,
    pub makes: usize,
    pub corrupted: usize,
    pub files: Vec<PathBuf>,
}

/// Generate a season straight to disk, a few games at a time, so memory stays
/// bounded for full-size seasons. Output bytes do not depend on thread count.
pub fn write_season(cfg: &SimConfig, out_dir: &Path) -> Result<SimSummary, SimError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let geometry = CourtGeometry::default();
    let league = League::generate(cfg);
    let paths = [TRACKING_FILE, EVENTS_FILE, ROSTER_FILE, GROUND_TRUTH_FILE].map(|f| out_dir.join(f));
    let mut tracking = BufWriter::with_capacity(1 << 20, File::create(&paths[0])?);
    let mut events = io::csv_writer(File::create(&paths[1])?);
    let mut truth = io::csv_writer(File::create(&paths[3])?);
    io::write_roster(File::create(&paths[2])?, &league.roster())?;

    let mut summary = SimSummary { games: cfg.n_games, shots: 0, frames: 0, makes: 0, corrupted: 0, files: paths.to_vec() };
    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut g0 = 0;
    while g0 < cfg.n_games {
        let g1 = (g0 + chunk).min(cfg.n_games);
        let outputs: Vec<GameOutput> =
            (g0..g1).into_par_iter().map(|g| generate_game(&league, cfg, &geometry, g)).collect();
        for game in &outputs {
            for f in &game.frames {
                io::write_frame_jsonl(&mut tracking, f)?;
            }
            for t in &game.tags {
                io::write_event(&mut events, t)?;
            }
            for r in &game.truth {
                truth.serialize(r).map_err(io::IoError::from)?;
                summary.makes += usize::from(r.made == 1);
                summary.corrupted += usize::from(r.corruption != Corruption::None);
            }
            summary.shots += game.tags.len();
            summary.frames += game.frames.len();
        }
        g0 = g1;
    }
    tracking.flush()?;
    events.flush()?;
    truth.flush()?;
    Ok(summary)
}
