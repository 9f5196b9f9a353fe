//! Depth, left-right and entry angle from a fitted height surface.
//!
//! The horizontal shot path is the total-least-squares line through the ball
//! samples, oriented from release toward the rim. Restricting the fitted
//! surface to that line gives a quadratic `z(s)` in the path coordinate; its
//! descending root at rim height is the rim-plane crossing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rad_to_deg, right_of, CourtGeometry, ShotFactors, Xy, Xyz};
use crate::trajectory::FittedTrajectory;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FactorError {
    #[error("fewer than two horizontally distinct samples")]
    DegeneratePath,
    #[error("modeled arc never reaches rim height (short airball)")]
    NoCrossing,
    #[error("rim-plane crossing is on the ascending branch (dz/ds = {dz_ds})")]
    AscendingCrossing { dz_ds: f64 },
}

/// Horizontal path line parametrized by `anchor + s * direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotPath {
    pub anchor: [f64; 2],
    /// Unit vector from release toward the rim.
    pub direction: [f64; 2],
    pub s_front_rim: f64,
    pub s_center: f64,
}

impl ShotPath {
    pub fn anchor(&self) -> Xy {
        Xy::new(self.anchor[0], self.anchor[1])
    }

    pub fn direction(&self) -> Xy {
        Xy::new(self.direction[0], self.direction[1])
    }

    pub fn point_at(&self, s: f64) -> Xy {
        self.anchor() + self.direction() * s
    }

    /// Build a path through `anchor` along `direction` (normalized here).
    pub fn through(anchor: Xy, direction: Xy, geometry: &CourtGeometry) -> Self {
        let d = direction.normalize();
        let s_center = (geometry.rim_xy() - anchor).dot(&d);
        ShotPath {
            anchor: [anchor.x, anchor.y],
            direction: [d.x, d.y],
            s_front_rim: s_center - geometry.rim_radius,
            s_center,
        }
    }
}

/// Total-least-squares line through the horizontal sample positions.
pub fn fit_path_line(samples: &[Xyz], geometry: &CourtGeometry) -> Result<ShotPath, FactorError> {
    if samples.len() < 2 {
        return Err(FactorError::DegeneratePath);
    }
    let n = samples.len() as f64;
    let centroid = samples.iter().fold(Xy::zeros(), |acc, p| acc + Xy::new(p.x, p.y)) / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in samples {
        let dx = p.x - centroid.x;
        let dy = p.y - centroid.y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let spread = sxx + syy;
    if !(spread > 1e-18 * (1.0 + centroid.norm_squared())) {
        return Err(FactorError::DegeneratePath);
    }
    // Major axis of the 2x2 scatter matrix.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut d = Xy::new(theta.cos(), theta.sin());
    let first = samples.first().unwrap();
    let last = samples.last().unwrap();
    let travel = Xy::new(last.x - first.x, last.y - first.y);
    let orient = if travel.norm() > 0.0 { travel } else { geometry.rim_xy() - centroid };
    if orient.dot(&d) < 0.0 {
        d = -d;
    }
    Ok(ShotPath::through(centroid, d, geometry))
}

/// Coefficients `(a, b, c)` of `z(s) = a s² + b s + c` along `path`.
pub fn height_along_path(fitted: &FittedTrajectory, path: &ShotPath) -> (f64, f64, f64) {
    let [b0, b1, b2, b3, b4, b5] = fitted.beta;
    let (ax, ay) = (path.anchor[0], path.anchor[1]);
    let (dx, dy) = (path.direction[0], path.direction[1]);
    let a = b3 * dx * dx + b4 * dy * dy + b5 * dx * dy;
    let b = b1 * dx + b2 * dy + 2.0 * b3 * ax * dx + 2.0 * b4 * ay * dy + b5 * (ax * dy + ay * dx);
    let c = b0 + b1 * ax + b2 * ay + b3 * ax * ax + b4 * ay * ay + b5 * ax * ay;
    (a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub s_cross: f64,
    pub dz_ds: f64,
}

/// Larger root of `a s² + b s + c = 0`, or `None` without a real root.
fn larger_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a == 0.0 {
        return (b != 0.0).then(|| -c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { r1 };
    Some(r1.max(r2))
}

/// Descending rim-plane crossing of the fitted arc along `path`.
pub fn rim_plane_crossing(
    fitted: &FittedTrajectory,
    path: &ShotPath,
    geometry: &CourtGeometry,
) -> Result<Crossing, FactorError> {
    let (a, b, c) = height_along_path(fitted, path);
    crossing_of_quadratic(a, b, c - geometry.rim_height())
}

/// Crossing of `a s² + b s + c` through zero on its descending branch.
pub fn crossing_of_quadratic(a: f64, b: f64, c: f64) -> Result<Crossing, FactorError> {
    let s = larger_root(a, b, c).ok_or(FactorError::NoCrossing)?;
    let dz_ds = 2.0 * a * s + b;
    if !(dz_ds < 0.0) {
        return Err(FactorError::AscendingCrossing { dz_ds });
    }
    Ok(Crossing { s_cross: s, dz_ds })
}

/// Depth past the front rim, signed lateral offset of the path from the rim
/// center (positive to the shooter's right) and entry angle in degrees.
pub fn compute_shot_factors(
    fitted: &FittedTrajectory,
    path: &ShotPath,
    geometry: &CourtGeometry,
) -> Result<ShotFactors, FactorError> {
    let crossing = rim_plane_crossing(fitted, path, geometry)?;
    Ok(factors_from_crossing(&crossing, path, geometry))
}

pub fn factors_from_crossing(crossing: &Crossing, path: &ShotPath, geometry: &CourtGeometry) -> ShotFactors {
    let offset = path.anchor() - geometry.rim_xy();
    ShotFactors {
        depth: crossing.s_cross - path.s_front_rim,
        left_right: offset.dot(&right_of(path.direction())),
        entry_angle: rad_to_deg(crossing.dz_ds.abs().atan()),
    }
}
