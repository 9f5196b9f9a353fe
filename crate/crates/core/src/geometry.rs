//! Shared domain types, court constants and unit conventions.
//!
//! Every downstream module works in the rim-local frame: the horizontal origin
//! is the center of the rim being attacked, `z` is height above the floor, and
//! the positive `x` axis points from the baseline into the court. Both hoops
//! map into this frame by a proper rotation, so "shooter's right" keeps the
//! same sign whichever end a team attacks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Horizontal point or direction, feet.
pub type Xy = Vector2<f64>;
/// Point in space, feet.
pub type Xyz = Vector3<f64>;

pub const COURT_LENGTH: f64 = 94.0;
pub const COURT_WIDTH: f64 = 50.0;
/// Distance from each baseline to the center of the nearer rim.
pub const HOOP_FROM_BASELINE: f64 = 5.25;
pub const RIM_HEIGHT: f64 = 10.0;
/// Slack around the court bounding box accepted by [`to_local_frame`].
pub const COURT_MARGIN: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown hoop end tag {0:?} (expected \"left\" or \"right\")")]
    UnknownHoopEnd(String),
    #[error("point ({x}, {y}, {z}) lies outside the court bounding box")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("identifier must be non-empty")]
    EmptyId,
}

/// Rim and ball dimensions in the rim-local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtGeometry {
    pub rim_center: [f64; 3],
    pub rim_radius: f64,
    pub ball_radius: f64,
    /// Height of the release pseudo-observations used by the trajectory prior.
    pub release_height_prior: f64,
}

impl Default for CourtGeometry {
    fn default() -> Self {
        // 18 in rim diameter, 9.43 in ball diameter.
        Self {
            rim_center: [0.0, 0.0, RIM_HEIGHT],
            rim_radius: 0.75,
            ball_radius: 0.3938,
            release_height_prior: 7.0,
        }
    }
}

impl CourtGeometry {
    pub fn rim_xy(&self) -> Xy {
        Xy::new(self.rim_center[0], self.rim_center[1])
    }

    pub fn rim_height(&self) -> f64 {
        self.rim_center[2]
    }

    pub fn validate(&self) -> bool {
        self.rim_radius > self.ball_radius
            && self.ball_radius > 0.0
            && self.rim_center[2] == RIM_HEIGHT
    }
}

/// Depth, left-right offset and entry angle of one shot at the rim plane.
///
/// `depth` is measured along the shot path from the front rim (rim center sits
/// at one rim radius, i.e. 9 in). `left_right` is positive when the ball passes
/// to the shooter's right of the hoop center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotFactors {
    pub depth: f64,
    pub left_right: f64,
    pub entry_angle: f64,
}

impl ShotFactors {
    pub fn is_valid(&self) -> bool {
        self.depth.is_finite()
            && self.left_right.is_finite()
            && self.entry_angle > 0.0
            && self.entry_angle <= 90.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.depth, self.left_right, self.entry_angle]
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self, GeometryError> {
                let id = id.into();
                if id.trim().is_empty() {
                    return Err(GeometryError::EmptyId);
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = GeometryError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl FromStr for $name {
            type Err = GeometryError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }
    };
}

string_id!(
    /// Opaque player identifier.
    PlayerId
);
string_id!(
    /// Opaque game identifier.
    GameId
);

/// Which hoop a shot is attacking, in court coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoopEnd {
    /// Hoop at `x = 5.25`.
    Left,
    /// Hoop at `x = 88.75`.
    Right,
}

impl HoopEnd {
    pub fn as_str(self) -> &'static str {
        match self {
            HoopEnd::Left => "left",
            HoopEnd::Right => "right",
        }
    }

    /// Rim center in court coordinates.
    pub fn rim_court_xy(self) -> Xy {
        match self {
            HoopEnd::Left => Xy::new(HOOP_FROM_BASELINE, COURT_WIDTH / 2.0),
            HoopEnd::Right => Xy::new(COURT_LENGTH - HOOP_FROM_BASELINE, COURT_WIDTH / 2.0),
        }
    }
}

impl fmt::Display for HoopEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HoopEnd {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(HoopEnd::Left),
            "right" | "r" => Ok(HoopEnd::Right),
            _ => Err(GeometryError::UnknownHoopEnd(s.to_string())),
        }
    }
}

fn in_court_box(x: f64, y: f64) -> bool {
    (-COURT_MARGIN..=COURT_LENGTH + COURT_MARGIN).contains(&x)
        && (-COURT_MARGIN..=COURT_WIDTH + COURT_MARGIN).contains(&y)
}

/// Horizontal court coordinates to the rim-local frame (no bounds check).
pub fn court_xy_to_local(p: Xy, hoop: HoopEnd) -> Xy {
    let rim = hoop.rim_court_xy();
    match hoop {
        HoopEnd::Left => p - rim,
        // 180° rotation about the right rim.
        HoopEnd::Right => rim - p,
    }
}

/// Inverse of [`court_xy_to_local`].
pub fn local_xy_to_court(p: Xy, hoop: HoopEnd) -> Xy {
    let rim = hoop.rim_court_xy();
    match hoop {
        HoopEnd::Left => p + rim,
        HoopEnd::Right => rim - p,
    }
}

/// Map a court-frame point (feet) into the rim-local frame of `hoop`.
///
/// The rim center maps to `(0, 0, 10)`; height is unchanged.
pub fn to_local_frame(p: Xyz, hoop: HoopEnd) -> Result<Xyz, GeometryError> {
    if !in_court_box(p.x, p.y) || !p.z.is_finite() {
        return Err(GeometryError::OutOfBounds { x: p.x, y: p.y, z: p.z });
    }
    let h = court_xy_to_local(Xy::new(p.x, p.y), hoop);
    Ok(Xyz::new(h.x, h.y, p.z))
}

/// Same as [`to_local_frame`] but takes the hoop tag as text.
pub fn to_local_frame_tagged(p: Xyz, hoop_end: &str) -> Result<Xyz, GeometryError> {
    to_local_frame(p, hoop_end.parse()?)
}

pub fn to_court_frame(p: Xyz, hoop: HoopEnd) -> Xyz {
    let h = local_xy_to_court(Xy::new(p.x, p.y), hoop);
    Xyz::new(h.x, h.y, p.z)
}

pub fn feet_to_inches(ft: f64) -> f64 {
    ft * 12.0
}

pub fn inches_to_feet(inches: f64) -> f64 {
    inches / 12.0
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * std::f64::consts::PI / 180.0
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / std::f64::consts::PI
}

/// Unit vector pointing 90° clockwise from `d` (the right-hand side when
/// facing along `d`).
pub fn right_of(d: Xy) -> Xy {
    Xy::new(d.y, -d.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rim_center_is_fixed_point() {
        for hoop in [HoopEnd::Left, HoopEnd::Right] {
            let rim = hoop.rim_court_xy();
            let local = to_local_frame(Xyz::new(rim.x, rim.y, 10.0), hoop).unwrap();
            assert_eq!(local, Xyz::new(0.0, 0.0, 10.0));
        }
    }

    #[test]
    fn baseline_side_point_maps_to_negative_x_at_both_ends() {
        let left = to_local_frame(Xyz::new(4.25, 25.0, 10.0), HoopEnd::Left).unwrap();
        assert_eq!(left, Xyz::new(-1.0, 0.0, 10.0));
        // 1 ft toward the right baseline is the same local point.
        let right = to_local_frame(Xyz::new(89.75, 25.0, 10.0), HoopEnd::Right).unwrap();
        assert_eq!(right, Xyz::new(-1.0, 0.0, 10.0));
        // A point at larger court y is on opposite local sides for the two
        // ends: the right-hoop map is a rotation, not a translation.
        let l = to_local_frame(Xyz::new(20.0, 30.0, 8.0), HoopEnd::Left).unwrap();
        let r = to_local_frame(Xyz::new(74.0, 30.0, 8.0), HoopEnd::Right).unwrap();
        assert!(l.y > 0.0 && r.y < 0.0);
        assert_eq!(l.x, r.x);
    }

    #[test]
    fn release_distance_is_preserved() {
        let hoop = HoopEnd::Right;
        let rim = hoop.rim_court_xy();
        let ang = 0.7_f64;
        let court = Xyz::new(rim.x - 23.75 * ang.cos(), rim.y + 23.75 * ang.sin(), 7.0);
        let local = to_local_frame(court, hoop).unwrap();
        let independent = ((court.x - 88.75).powi(2) + (court.y - 25.0).powi(2)).sqrt();
        assert!((local.xy().norm() - 23.75).abs() < 1e-12);
        assert!((independent - 23.75).abs() < 1e-12);
    }

    #[test]
    fn unknown_hoop_tag_is_rejected() {
        let err = to_local_frame_tagged(Xyz::new(1.0, 1.0, 1.0), "middle").unwrap_err();
        assert!(matches!(err, GeometryError::UnknownHoopEnd(_)));
        assert!(to_local_frame_tagged(Xyz::new(1.0, 1.0, 1.0), "R").is_ok());
    }

    #[test]
    fn out_of_box_points_are_rejected() {
        assert!(to_local_frame(Xyz::new(-5.5, 10.0, 1.0), HoopEnd::Left).is_err());
        assert!(to_local_frame(Xyz::new(98.9, 54.9, 1.0), HoopEnd::Left).is_ok());
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(feet_to_inches(0.75), 9.0);
        assert_eq!(feet_to_inches(0.0), 0.0);
        assert_eq!(feet_to_inches(0.875), 10.5);
        assert!((deg_to_rad(180.0) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn default_geometry_is_valid() {
        let g = CourtGeometry::default();
        assert!(g.validate());
        assert_eq!(g.rim_height(), 10.0);
    }

    #[test]
    fn ids_must_be_non_empty() {
        assert!(PlayerId::new("").is_err());
        assert!(GameId::new("  ").is_err());
        assert_eq!(PlayerId::new("P01").unwrap().as_str(), "P01");
    }

    fn court_point() -> impl Strategy<Value = Xyz> {
        (-5.0..99.0f64, -5.0..55.0f64, 0.0..20.0f64).prop_map(|(x, y, z)| Xyz::new(x, y, z))
    }

    proptest! {
        #[test]
        fn frame_map_is_an_isometry(a in court_point(), b in court_point(), right in any::<bool>()) {
            let hoop = if right { HoopEnd::Right } else { HoopEnd::Left };
            let la = to_local_frame(a, hoop).unwrap();
            let lb = to_local_frame(b, hoop).unwrap();
            prop_assert!(((la - lb).norm() - (a - b).norm()).abs() < 1e-12);
            let back = to_court_frame(la, hoop);
            prop_assert!((back - a).norm() < 1e-12);
        }

        #[test]
        fn conversions_round_trip(x in -1e3..1e3f64) {
            prop_assert!((inches_to_feet(feet_to_inches(x)) - x).abs() < 1e-12);
            prop_assert!((rad_to_deg(deg_to_rad(x)) - x).abs() < 1e-12);
        }
    }
}
