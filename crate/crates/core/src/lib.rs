//! Shot trajectory reconstruction and perimeter-defense metrics from 25 Hz
//! basketball tracking data.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`] loads tracking frames, shot tags and rosters and assembles one
//!   [`ShotEvent`](ingest::ShotEvent) per tagged attempt, including the
//!   nearest-defender context at release.
//! * [`trajectory`] fits a quadratic height surface to each shot's ball samples
//!   with a conjugate Normal–Inverse-Gamma prior seeded by pseudo-data.
//! * [`factors`] turns a fitted surface into depth, left-right and entry angle.
//! * [`makeprob`] trains a logistic make-probability model on those factors.
//! * [`effects`] fits sum-to-zero contrast regressions for defender impact and
//!   shooter resilience, on binary outcomes or modeled make probabilities.
//! * [`sim`] generates synthetic seasons with planted ground truth.
//! * [`eval`] reproduces the contested/open, profile, subsample-MSE and
//!   split-half analyses on top of the other modules.
//!
//! All lengths are feet and all angles degrees unless a name says otherwise.

pub mod effects;
pub mod eval;
pub mod factors;
pub mod geometry;
pub mod ingest;
pub mod io;
pub mod makeprob;
pub mod numeric;
pub mod pipeline;
pub mod sim;
pub mod stats;
pub mod trajectory;

pub use geometry::{CourtGeometry, GameId, HoopEnd, PlayerId, ShotFactors, Xy, Xyz};
