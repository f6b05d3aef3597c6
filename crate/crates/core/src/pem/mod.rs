//! Perception error model: data types and error injection.
//!
//! A model partitions the ego surroundings into conditions, each the product
//! of an occlusion level and a cell of a polar grid. Every condition carries a
//! two-state detection chain and a bivariate Gaussian over the polar position
//! error of detected objects.

mod grid;
mod inject;
mod io;
mod model;

pub use grid::{Condition, GridSpec, OcclusionLevel, PolarCoord};
pub(crate) use inject::check_unique_ids;
pub use inject::{apply, sample_error, step_detection, GroundTruthObject, PerceivedObject, TrackState};
pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use model::{ConditionParams, ErrorDistribution, PemModel, TransitionMatrix};

use std::f64::consts::PI;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut a = theta.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    // rem_euclid can land on exactly 2pi - ulp; keep the half-open interval
    if a <= -PI {
        a += two_pi;
    }
    a
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("condition {index}: {field} {reason}")]
    InvalidParameter {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("model has {found} conditions, grid requires {expected}")]
    ConditionCount { expected: usize, found: usize },
    #[error("duplicate condition (occ={occ}, ring={ring}, sector={sector})")]
    DuplicateCondition { occ: usize, ring: usize, sector: usize },
    #[error("condition (occ={occ}, ring={ring}, sector={sector}) out of grid")]
    ConditionOutOfGrid { occ: usize, ring: usize, sector: usize },
    #[error("duplicate object id {0} in frame")]
    DuplicateId(u64),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
