//! Logistic shot-make model on depth, left-right and entry angle.
//!
//! Factors are standardized, then expanded into a full quadratic design
//! `[1, D, LR, A, D², LR², A², D·LR, D·A, LR·A]`. Coefficients maximize the
//! logistic log-likelihood minus a small ridge penalty on every term except
//! the intercept, via Newton (IRLS) steps with step halving.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{feet_to_inches, inches_to_feet, ShotFactors};
use crate::stats::{mean, std_dev};

pub const N_FEATURES: usize = 10;
pub const MODEL_VERSION: u32 = 1;
const ETA_CLAMP: f64 = 35.0;

pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["intercept", "depth", "lr", "angle", "depth2", "lr2", "angle2", "depth_lr", "depth_angle", "lr_angle"];

#[derive(Debug, Error)]
pub enum MakeProbError {
    #[error("need at least {min} shots to train, got {got}")]
    TooFewShots { min: usize, got: usize },
    #[error("all outcomes belong to one class")]
    ClassDegenerate,
    #[error("{0} factor rows but {1} outcomes")]
    LengthMismatch(usize, usize),
    #[error("non-finite factor or response value")]
    NonFinite,
    #[error("factor {0} has zero spread; cannot standardize")]
    ZeroSpread(&'static str),
    #[error("Newton system is not positive definite")]
    Singular,
    #[error("unsupported model version {0} (expected {MODEL_VERSION})")]
    Version(u32),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-factor centering and scaling applied before feature expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; 3],
    pub scales: [f64; 3],
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer { means: [0.0; 3], scales: [1.0; 3] }
    }

    /// Sample mean and standard deviation of each factor.
    pub fn fit(rows: &[ShotFactors]) -> Result<Self, MakeProbError> {
        let mut means = [0.0; 3];
        let mut scales = [0.0; 3];
        for k in 0..3 {
            let col: Vec<f64> = rows.iter().map(|r| r.as_array()[k]).collect();
            means[k] = mean(&col);
            scales[k] = std_dev(&col);
            if !(scales[k] > 0.0 && scales[k].is_finite()) {
                return Err(MakeProbError::ZeroSpread(["depth", "lr", "angle"][k]));
            }
        }
        Ok(Standardizer { means, scales })
    }

    pub fn apply(&self, f: &ShotFactors) -> [f64; 3] {
        let v = f.as_array();
        [0, 1, 2].map(|k| (v[k] - self.means[k]) / self.scales[k])
    }
}

/// Quadratic expansion of already standardized `(D, LR, A)`.
pub fn design_row(z: [f64; 3]) -> [f64; N_FEATURES] {
    let [d, l, a] = z;
    [1.0, d, l, a, d * d, l * l, a * a, d * l, d * a, l * a]
}

pub fn design_row_for(f: &ShotFactors, s: &Standardizer) -> [f64; N_FEATURES] {
    design_row(s.apply(f))
}

/// Logistic function with the linear predictor clamped so results stay
/// strictly inside (0, 1).
pub fn sigmoid(eta: f64) -> f64 {
    let e = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let x = e.exp();
        x / (1.0 + x)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn dot(x: &[f64; N_FEATURES], beta: &[f64; N_FEATURES]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Ridge penalty on non-intercept coefficients.
    pub lambda: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the penalized score.
    pub grad_tol: f64,
    pub min_shots: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lambda: 1e-6, max_iter: 100, grad_tol: 1e-8, min_shots: 500 }
    }
}

/// Penalized log-likelihood `Σ [y η − log(1 + e^η)] − (λ/2) Σ_{j≥1} β_j²`.
pub fn penalized_log_likelihood(x: &[[f64; N_FEATURES]], y: &[f64], beta: &[f64; N_FEATURES], lambda: f64) -> f64 {
    let ll: f64 = x.iter().zip(y).map(|(row, &yi)| {
        let eta = dot(row, beta);
        yi * eta - softplus(eta)
    }).sum();
    ll - 0.5 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Gradient of [`penalized_log_likelihood`].
pub fn score(x: &[[f64; N_FEATURES]], y: &[f64], beta: &[f64; N_FEATURES], lambda: f64) -> [f64; N_FEATURES] {
    let mut g = [0.0; N_FEATURES];
    for (row, &yi) in x.iter().zip(y) {
        let r = yi - sigmoid(dot(row, beta));
        for j in 0..N_FEATURES {
            g[j] += r * row[j];
        }
    }
    for j in 1..N_FEATURES {
        g[j] -= lambda * beta[j];
    }
    g
}

/// Fisher information `Xᵀ W X` (without the penalty).
pub fn information_matrix(x: &[[f64; N_FEATURES]], beta: &[f64; N_FEATURES]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(N_FEATURES, N_FEATURES);
    for row in x {
        let p = sigmoid(dot(row, beta));
        let w = p * (1.0 - p);
        for i in 0..N_FEATURES {
            let wi = w * row[i];
            for j in i..N_FEATURES {
                h[(i, j)] += wi * row[j];
            }
        }
    }
    h.fill_lower_triangle_with_upper_triangle();
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignFit {
    pub coeffs: [f64; N_FEATURES],
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub grad_max: f64,
}

/// Newton iterations on a prepared design. Deterministic and single-threaded.
pub fn fit_design(x: &[[f64; N_FEATURES]], y: &[f64], cfg: &TrainConfig) -> Result<DesignFit, MakeProbError> {
    if x.len() != y.len() {
        return Err(MakeProbError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(MakeProbError::NonFinite);
    }
    let mut beta = [0.0; N_FEATURES];
    // Start the intercept at the empirical log-odds.
    let rate = mean(y).clamp(1e-6, 1.0 - 1e-6);
    beta[0] = (rate / (1.0 - rate)).ln();
    let mut obj = penalized_log_likelihood(x, y, &beta, cfg.lambda);
    let mut iterations = 0;
    let mut converged = false;
    let mut g = score(x, y, &beta, cfg.lambda);
    for it in 0..cfg.max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations = it + 1;
        let mut h = information_matrix(x, &beta);
        for j in 1..N_FEATURES {
            h[(j, j)] += cfg.lambda;
        }
        let chol = h.cholesky().ok_or(MakeProbError::Singular)?;
        let step = chol.solve(&DVector::from_row_slice(&g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = beta;
            for j in 0..N_FEATURES {
                cand[j] += t * step[j];
            }
            let cand_obj = penalized_log_likelihood(x, y, &cand, cfg.lambda);
            if cand_obj >= obj {
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        g = score(x, y, &beta, cfg.lambda);
        if !accepted {
            // No ascent possible in floating point: we are at the optimum to
            // working precision unless the gradient says otherwise.
            converged = g.iter().all(|v| v.abs() < cfg.grad_tol);
            break;
        }
    }
    if !converged {
        converged = g.iter().all(|v| v.abs() < cfg.grad_tol);
    }
    let grad_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DesignFit { coeffs: beta, converged, iterations, log_likelihood: obj, grad_max })
}

/// Trained model plus everything needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakeProbModel {
    pub version: u32,
    pub coeffs: [f64; N_FEATURES],
    pub standardizer: Standardizer,
    pub train_n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub lambda: f64,
}

impl MakeProbModel {
    /// A model with the given coefficients on standardized features.
    pub fn from_coeffs(coeffs: [f64; N_FEATURES], standardizer: Standardizer) -> Self {
        MakeProbModel {
            version: MODEL_VERSION,
            coeffs,
            standardizer,
            train_n: 0,
            converged: true,
            iterations: 0,
            log_likelihood: f64::NAN,
            lambda: 0.0,
        }
    }

    pub fn linear_predictor(&self, f: &ShotFactors) -> f64 {
        dot(&design_row_for(f, &self.standardizer), &self.coeffs)
    }

    pub fn predict(&self, f: &ShotFactors) -> f64 {
        sigmoid(self.linear_predictor(f))
    }

    pub fn save(&self, path: &Path) -> Result<(), MakeProbError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MakeProbError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MakeProbError> {
        let model: MakeProbModel = serde_json::from_str(text)?;
        if model.version != MODEL_VERSION {
            return Err(MakeProbError::Version(model.version));
        }
        if model.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(MakeProbError::NonFinite);
        }
        Ok(model)
    }
}

pub fn predict(model: &MakeProbModel, f: &ShotFactors) -> f64 {
    model.predict(f)
}

/// Standardize factors, expand, and fit.
pub fn train(factors: &[ShotFactors], made: &[bool], cfg: &TrainConfig) -> Result<MakeProbModel, MakeProbError> {
    if factors.len() != made.len() {
        return Err(MakeProbError::LengthMismatch(factors.len(), made.len()));
    }
    if factors.len() < cfg.min_shots {
        return Err(MakeProbError::TooFewShots { min: cfg.min_shots, got: factors.len() });
    }
    if made.iter().all(|&m| m) || made.iter().all(|&m| !m) {
        return Err(MakeProbError::ClassDegenerate);
    }
    if factors.iter().any(|f| !f.is_valid()) {
        return Err(MakeProbError::NonFinite);
    }
    let standardizer = Standardizer::fit(factors)?;
    let x: Vec<_> = factors.iter().map(|f| design_row_for(f, &standardizer)).collect();
    let y: Vec<f64> = made.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let fit = fit_design(&x, &y, cfg)?;
    Ok(MakeProbModel {
        version: MODEL_VERSION,
        coeffs: fit.coeffs,
        standardizer,
        train_n: factors.len(),
        converged: fit.converged,
        iterations: fit.iterations,
        log_likelihood: fit.log_likelihood,
        lambda: cfg.lambda,
    })
}

/// Axis of an evaluation grid, in display units (inches for depth and
/// left-right, degrees for angle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub depth_in: GridAxis,
    pub lr_in: GridAxis,
    pub angle_deg: GridAxis,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            depth_in: GridAxis { start: 0.0, stop: 24.0, step: 1.0 },
            lr_in: GridAxis { start: -8.0, stop: 8.0, step: 1.0 },
            angle_deg: GridAxis { start: 30.0, stop: 60.0, step: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub depth_in: f64,
    pub lr_in: f64,
    pub angle_deg: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySurface {
    pub cells: Vec<SurfaceCell>,
    pub argmax: SurfaceCell,
}

/// Dense evaluation of the model over a factor grid; ties for the maximum go
/// to the first cell in depth, lr, angle order.
pub fn probability_surface(model: &MakeProbModel, grid: &GridSpec) -> ProbabilitySurface {
    let mut cells = Vec::new();
    for d in grid.depth_in.values() {
        for l in grid.lr_in.values() {
            for a in grid.angle_deg.values() {
                let f = ShotFactors { depth: inches_to_feet(d), left_right: inches_to_feet(l), entry_angle: a };
                cells.push(SurfaceCell { depth_in: d, lr_in: l, angle_deg: a, probability: model.predict(&f) });
            }
        }
    }
    let argmax = *cells
        .iter()
        .reduce(|best, c| if c.probability > best.probability { c } else { best })
        .expect("grid axes always yield at least one value");
    ProbabilitySurface { cells, argmax }
}

/// Mean prediction over `reference` shots with one factor overwritten by each
/// grid value (a partial-dependence curve). `factor` is 0 = depth (inches),
/// 1 = left-right (inches), 2 = angle (degrees).
pub fn partial_dependence(model: &MakeProbModel, reference: &[ShotFactors], factor: usize, values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let preds: Vec<f64> = reference
                .iter()
                .map(|f| {
                    let mut g = *f;
                    match factor {
                        0 => g.depth = inches_to_feet(v),
                        1 => g.left_right = inches_to_feet(v),
                        _ => g.entry_angle = v,
                    }
                    model.predict(&g)
                })
                .collect();
            mean(&preds)
        })
        .collect()
}

/// Display helper: depth of a factor row in inches.
pub fn depth_inches(f: &ShotFactors) -> f64 {
    feet_to_inches(f.depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn design_row_hand_values() {
        assert_eq!(design_row([0.0, 0.0, 0.0]), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(design_row([1.0, 2.0, 3.0]), [1.0, 1.0, 2.0, 3.0, 1.0, 4.0, 9.0, 2.0, 3.0, 6.0]);
    }

    #[test]
    fn sigmoid_saturates_inside_unit_interval() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(f64::INFINITY) < 1.0);
        assert!(sigmoid(f64::NEG_INFINITY) > 0.0);
        let zero = MakeProbModel::from_coeffs([0.0; N_FEATURES], Standardizer::identity());
        let f = ShotFactors { depth: 3.0, left_right: -1.0, entry_angle: 70.0 };
        assert_eq!(zero.predict(&f), 0.5);
    }

    fn toy(n: usize, seed: u64) -> (Vec<ShotFactors>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let f = ShotFactors {
                depth: rng.random_range(0.2..1.6),
                left_right: rng.random_range(-0.5..0.5),
                entry_angle: rng.random_range(35.0..55.0),
            };
            let p = sigmoid(1.0 - 8.0 * (f.depth - 0.8).powi(2) - 10.0 * f.left_right.powi(2));
            ys.push(rng.random::<f64>() < p);
            fs.push(f);
        }
        (fs, ys)
    }

    #[test]
    fn training_errors() {
        let (fs, ys) = toy(600, 1);
        assert!(matches!(train(&fs[..100], &ys[..100], &TrainConfig::default()), Err(MakeProbError::TooFewShots { .. })));
        let all = vec![true; fs.len()];
        assert!(matches!(train(&fs, &all, &TrainConfig::default()), Err(MakeProbError::ClassDegenerate)));
    }

    #[test]
    fn deterministic_and_calibrated() {
        let (fs, ys) = toy(2000, 7);
        let cfg = TrainConfig::default();
        let a = train(&fs, &ys, &cfg).unwrap();
        let b = train(&fs, &ys, &cfg).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert!(a.converged);
        let mean_p = mean(&fs.iter().map(|f| a.predict(f)).collect::<Vec<_>>());
        let rate = ys.iter().filter(|&&y| y).count() as f64 / ys.len() as f64;
        assert!((mean_p - rate).abs() < 1e-6);
    }

    #[test]
    fn standardization_invariance() {
        let (fs, ys) = toy(1500, 3);
        let scaled: Vec<ShotFactors> = fs
            .iter()
            .map(|f| ShotFactors { depth: 12.0 * f.depth + 4.0, left_right: 3.0 * f.left_right, entry_angle: f.entry_angle / 10.0 - 2.0 })
            .collect();
        let cfg = TrainConfig::default();
        let a = train(&fs, &ys, &cfg).unwrap();
        let b = train(&scaled, &ys, &cfg).unwrap();
        for (f, g) in fs.iter().zip(&scaled) {
            assert!((a.predict(f) - b.predict(g)).abs() < 1e-8);
        }
    }

    #[test]
    fn diagonal_model_is_monotone() {
        let mut c = [0.0; N_FEATURES];
        c[1] = 0.7;
        let m = MakeProbModel::from_coeffs(c, Standardizer::identity());
        let mut prev = 0.0;
        for k in 0..20 {
            let p = m.predict(&ShotFactors { depth: -2.0 + 0.2 * k as f64, left_right: 0.1, entry_angle: 45.0 });
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn json_round_trip_and_version() {
        let (fs, ys) = toy(800, 11);
        let m = train(&fs, &ys, &TrainConfig::default()).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(MakeProbModel::from_json(&text).unwrap(), m);
        let bad = text.replace("\"version\":1", "\"version\":9");
        assert!(matches!(MakeProbModel::from_json(&bad), Err(MakeProbError::Version(9))));
    }

    #[test]
    fn constant_model_gives_flat_surface() {
        let mut c = [0.0; N_FEATURES];
        c[0] = -0.4;
        let m = MakeProbModel::from_coeffs(c, Standardizer::identity());
        let s = probability_surface(&m, &GridSpec::default());
        assert!(s.cells.iter().all(|cell| cell.probability == s.cells[0].probability));
        assert_eq!(s.argmax, s.cells[0]);
    }
}
