//! Quadratic height-surface fit for a single shot.
//!
//! Ball height is modeled as `z = β0 + β1 x + β2 y + β3 x² + β4 y² + β5 xy` in the
//! rim-local frame, with a conjugate Normal–Inverse-Gamma prior. The prior is
//! built in two steps: a nearly flat base prior (`μ0 = 0`, `Λ0 = εI`,
//! `a0 = b0 = 10⁻³`) is updated with four pseudo-observations (two at the
//! shooter's feet at release height, two at the rim center at rim height), and
//! the result is updated again with the tracked ball samples. The reported
//! coefficients are the posterior mean.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CourtGeometry, Xy, Xyz};
use crate::numeric::{solve_spd_refined, spd_condition_number, Dd, SolveError};

pub const N_COEFFS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("{n} samples, at least {min} required")]
    InsufficientSamples { n: usize, min: usize },
    #[error("sample coordinates must be finite")]
    NonFinite,
    #[error("posterior precision condition number {condition:.3e} exceeds limit")]
    IllConditioned { condition: f64 },
    #[error("posterior solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("invalid prior: {0}")]
    InvalidPrior(&'static str),
    #[error("no samples")]
    Empty,
}

/// Feature row `[1, x, y, x², y², xy]`.
pub fn features(xy: Xy) -> [f64; N_COEFFS] {
    let (x, y) = (xy.x, xy.y);
    [1.0, x, y, x * x, y * y, x * y]
}

fn features_dd(xy: Xy) -> [Dd; N_COEFFS] {
    let (x, y) = (xy.x, xy.y);
    [
        Dd::from_f64(1.0),
        Dd::from_f64(x),
        Dd::from_f64(y),
        Dd::prod(x, x),
        Dd::prod(y, y),
        Dd::prod(x, y),
    ]
}

fn dot(beta: &[f64; N_COEFFS], f: &[f64; N_COEFFS]) -> f64 {
    beta.iter().zip(f).map(|(b, x)| b * x).sum()
}

/// One (possibly weighted) height observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub xy: Xy,
    pub z: f64,
    pub weight: f64,
}

impl Observation {
    pub fn new(xy: Xy, z: f64) -> Self {
        Self { xy, z, weight: 1.0 }
    }

    pub fn from_sample(p: &Xyz) -> Self {
        Self::new(Xy::new(p.x, p.y), p.z)
    }
}

/// Hyperparameters of the base prior and the pseudo-data update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Base prior precision is `epsilon * I`.
    pub epsilon: f64,
    pub a0: f64,
    pub b0: f64,
    /// Weight each pseudo-observation carries relative to a real sample.
    pub pseudo_weight: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6, a0: 1e-3, b0: 1e-3, pseudo_weight: 1.0 }
    }
}

/// Normal–Inverse-Gamma state: `β | σ² ~ N(mean, σ² precision⁻¹)`,
/// `σ² ~ IG(shape, scale)`.
///
/// The precision is held in double-double so that chained updates do not
/// round away the information carried by near-null directions.
#[derive(Debug, Clone, PartialEq)]
pub struct NigState {
    mean: [f64; N_COEFFS],
    precision: [Dd; N_COEFFS * N_COEFFS],
    shape: f64,
    scale: f64,
    condition: f64,
}

impl NigState {
    /// `μ0 = 0`, `Λ0 = εI`.
    pub fn base(cfg: &PriorConfig) -> Result<Self, TrajectoryError> {
        if !(cfg.epsilon > 0.0) {
            return Err(TrajectoryError::InvalidPrior("epsilon must be positive"));
        }
        if !(cfg.a0 > 0.0 && cfg.b0 > 0.0) {
            return Err(TrajectoryError::InvalidPrior("a0 and b0 must be positive"));
        }
        let mut precision = [Dd::ZERO; N_COEFFS * N_COEFFS];
        for i in 0..N_COEFFS {
            precision[i * N_COEFFS + i] = Dd::from_f64(cfg.epsilon);
        }
        Ok(Self { mean: [0.0; N_COEFFS], precision, shape: cfg.a0, scale: cfg.b0, condition: 1.0 })
    }

    pub fn mean(&self) -> [f64; N_COEFFS] {
        self.mean
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Condition number of the precision matrix (2-norm).
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn precision(&self) -> [[f64; N_COEFFS]; N_COEFFS] {
        let mut out = [[0.0; N_COEFFS]; N_COEFFS];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.precision[i * N_COEFFS + j].to_f64();
            }
        }
        out
    }

    /// Conjugate update with a batch of observations.
    pub fn update(&self, obs: &[Observation]) -> Result<NigState, TrajectoryError> {
        let n = N_COEFFS;
        let mut lambda = self.precision;
        // η = Λ0 μ0 + Σ w f z
        let mut eta = [Dd::ZERO; N_COEFFS];
        for i in 0..n {
            for j in 0..n {
                eta[i] = eta[i] + self.precision[i * n + j].mul_f64(self.mean[j]);
            }
        }
        let mut weight_sum = 0.0;
        for o in obs {
            if !(o.xy.x.is_finite() && o.xy.y.is_finite() && o.z.is_finite() && o.weight.is_finite()) {
                return Err(TrajectoryError::NonFinite);
            }
            let f = features_dd(o.xy);
            for i in 0..n {
                let fi = f[i].mul_f64(o.weight);
                for j in i..n {
                    lambda[i * n + j] = lambda[i * n + j] + fi * f[j];
                }
                eta[i] = eta[i] + fi.mul_f64(o.z);
            }
            weight_sum += o.weight;
        }
        for i in 0..n {
            for j in 0..i {
                lambda[i * n + j] = lambda[j * n + i];
            }
        }
        let sol = solve_spd_refined(&lambda, &eta, n)?;
        let mut mean = [0.0; N_COEFFS];
        mean.copy_from_slice(&sol.x);

        // b_n = b + ½ [Σ w (z - fᵀμn)² + (μn - μ)ᵀ Λ (μn - μ)]
        let mut quad = Dd::ZERO;
        for o in obs {
            let r = o.z - dot(&mean, &features(o.xy));
            quad = quad + Dd::prod(r, r).mul_f64(o.weight);
        }
        let delta: Vec<f64> = mean.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for i in 0..n {
            for j in 0..n {
                quad = quad + self.precision[i * n + j].mul_f64(delta[i]).mul_f64(delta[j]);
            }
        }

        let hi = DMatrix::from_fn(n, n, |i, j| lambda[i * n + j].to_f64());
        Ok(NigState {
            mean,
            precision: lambda,
            shape: self.shape + 0.5 * weight_sum,
            scale: self.scale + 0.5 * quad.to_f64(),
            condition: spd_condition_number(&hi),
        })
    }
}

/// A pseudo-observation anchoring the prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoPoint {
    pub xy: Xy,
    pub z: f64,
}

/// Two points at the shooter's location at the prior release height and two
/// at the rim center at rim height.
pub fn make_pseudo_data(release_xy: Xy, geometry: &CourtGeometry) -> [PseudoPoint; 4] {
    let release = PseudoPoint { xy: release_xy, z: geometry.release_height_prior };
    let rim = PseudoPoint { xy: geometry.rim_xy(), z: geometry.rim_height() };
    [release, release, rim, rim]
}

fn pseudo_observations(release_xy: Xy, geometry: &CourtGeometry, weight: f64) -> Vec<Observation> {
    make_pseudo_data(release_xy, geometry)
        .iter()
        .map(|p| Observation { xy: p.xy, z: p.z, weight })
        .collect()
}

/// Minimum samples, condition guard and prior for [`fit_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub prior: PriorConfig,
    pub min_samples: usize,
    /// Fits whose posterior precision is worse conditioned than this are
    /// flagged unfittable.
    pub max_condition: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { prior: PriorConfig::default(), min_samples: 5, max_condition: 1e14 }
    }
}

/// Posterior-mean surface for one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTrajectory {
    pub beta: [f64; N_COEFFS],
    pub posterior_precision: [[f64; N_COEFFS]; N_COEFFS],
    pub posterior_a: f64,
    pub posterior_b: f64,
    /// Root-mean-square height residual over the observed samples.
    pub rmse: f64,
    pub n_samples: usize,
    pub condition_number: f64,
}

impl FittedTrajectory {
    pub fn height_at(&self, xy: Xy) -> f64 {
        dot(&self.beta, &features(xy))
    }

    /// Posterior mean of the noise variance, when it exists.
    pub fn noise_variance(&self) -> Option<f64> {
        (self.posterior_a > 1.0).then(|| self.posterior_b / (self.posterior_a - 1.0))
    }

    /// Wrap a bare coefficient vector (diagnostics left empty).
    pub fn from_beta(beta: [f64; N_COEFFS]) -> Self {
        Self {
            beta,
            posterior_precision: [[0.0; N_COEFFS]; N_COEFFS],
            posterior_a: 0.0,
            posterior_b: 0.0,
            rmse: 0.0,
            n_samples: 0,
            condition_number: f64::NAN,
        }
    }
}

/// Fit the height surface to `samples` (rim-local frame).
pub fn fit_trajectory(
    samples: &[Xyz],
    release_xy: Xy,
    cfg: &TrajectoryConfig,
    geometry: &CourtGeometry,
) -> Result<FittedTrajectory, TrajectoryError> {
    if samples.len() < cfg.min_samples {
        return Err(TrajectoryError::InsufficientSamples { n: samples.len(), min: cfg.min_samples });
    }
    if samples.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
        return Err(TrajectoryError::NonFinite);
    }
    let pseudo = pseudo_observations(release_xy, geometry, cfg.prior.pseudo_weight);
    let observed: Vec<Observation> = samples.iter().map(Observation::from_sample).collect();
    let posterior = NigState::base(&cfg.prior)?.update(&pseudo)?.update(&observed)?;
    if !(posterior.condition_number() <= cfg.max_condition) {
        return Err(TrajectoryError::IllConditioned { condition: posterior.condition_number() });
    }
    let mut fitted = FittedTrajectory {
        beta: posterior.mean(),
        posterior_precision: posterior.precision(),
        posterior_a: posterior.shape(),
        posterior_b: posterior.scale(),
        rmse: 0.0,
        n_samples: samples.len(),
        condition_number: posterior.condition_number(),
    };
    fitted.rmse = trajectory_rmse(&fitted, samples)?;
    Ok(fitted)
}

/// Root-mean-square of the height residuals over `samples`.
pub fn trajectory_rmse(fitted: &FittedTrajectory, samples: &[Xyz]) -> Result<f64, TrajectoryError> {
    if samples.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let ss: f64 = samples
        .iter()
        .map(|p| {
            let r = p.z - fitted.height_at(Xy::new(p.x, p.y));
            r * r
        })
        .sum();
    Ok((ss / samples.len() as f64).sqrt())
}

/// Why a shot was dropped before make-probability training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Fewer samples than required (partially missing trajectory).
    Partial,
    /// Gap between consecutive samples above the limit.
    Gap,
    /// Fitted surface too far from the raw samples.
    Noisy,
    /// Normal equations too ill-conditioned or not solvable.
    Unfittable,
    /// Modeled arc never comes down through the rim plane.
    NoCrossing,
    /// Rim-plane crossing on the ascending branch.
    DegenerateCrossing,
    /// No opposing player on the floor at release.
    NoDefender,
    /// Shooter or defender missing from the release frame or roster.
    UnknownPlayer,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Partial => "partial",
            RejectReason::Gap => "gap",
            RejectReason::Noisy => "noisy",
            RejectReason::Unfittable => "unfittable",
            RejectReason::NoCrossing => "no_crossing",
            RejectReason::DegenerateCrossing => "degenerate_crossing",
            RejectReason::NoDefender => "no_defender",
            RejectReason::UnknownPlayer => "unknown_player",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    pub max_rmse: f64,
    pub min_samples: usize,
    /// Largest allowed time between consecutive samples, seconds.
    pub max_gap: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self { max_rmse: 0.5, min_samples: 5, max_gap: 0.2 }
    }
}

/// Per-reason rejection counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub retained: usize,
    pub rejected: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn retention_fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.retained as f64 / self.total as f64
        }
    }

    pub fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason.as_str().to_string()).or_default() += 1;
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejected.get(reason.as_str()).copied().unwrap_or(0)
    }
}

/// A shot's fit outcome together with the sampling diagnostics the filter
/// needs.
#[derive(Debug, Clone)]
pub struct FitCandidate {
    pub n_samples: usize,
    /// Largest time step between consecutive samples, seconds.
    pub max_gap: f64,
    pub fit: Result<FittedTrajectory, TrajectoryError>,
}

/// Indices of retained candidates plus the reason for each rejection.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub retained: Vec<usize>,
    pub rejected: Vec<(usize, RejectReason)>,
    pub report: FilterReport,
}

/// Classify a single candidate; `None` means it passes.
pub fn rejection_reason(c: &FitCandidate, t: &FilterThresholds) -> Option<RejectReason> {
    if c.n_samples < t.min_samples {
        return Some(RejectReason::Partial);
    }
    if c.max_gap > t.max_gap {
        return Some(RejectReason::Gap);
    }
    match &c.fit {
        Err(TrajectoryError::InsufficientSamples { .. }) | Err(TrajectoryError::Empty) => {
            Some(RejectReason::Partial)
        }
        Err(_) => Some(RejectReason::Unfittable),
        Ok(f) if !(f.rmse <= t.max_rmse) => Some(RejectReason::Noisy),
        Ok(_) => None,
    }
}

pub fn filter_shots(candidates: &[FitCandidate], thresholds: &FilterThresholds) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    out.report.total = candidates.len();
    for (i, c) in candidates.iter().enumerate() {
        match rejection_reason(c, thresholds) {
            None => out.retained.push(i),
            Some(r) => {
                out.report.reject(r);
                out.rejected.push((i, r));
            }
        }
    }
    out.report.retained = out.retained.len();
    out
}
