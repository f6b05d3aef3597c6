use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{wrap_angle, Condition, ModelError, OcclusionLevel, PemModel, PolarCoord};

/// Smallest perceived range; a radial ratio draw at or below zero is clamped here.
pub const MIN_PERCEIVED_RANGE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u64,
    pub position: PolarCoord,
    pub occlusion: OcclusionLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceivedObject {
    pub source_id: u64,
    pub position: PolarCoord,
}

/// Detection state carried between frames, keyed by object id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackState {
    detected: BTreeMap<u64, bool>,
}

impl TrackState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: u64) -> Option<bool> {
        self.detected.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.detected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detected.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.detected.keys().copied()
    }

    pub fn clear(&mut self) {
        self.detected.clear();
    }
}

/// Advances one detection chain by a single step. Consumes one uniform draw.
pub fn step_detection<R: Rng + ?Sized>(model: &PemModel, cond: Condition, prev_detected: bool, rng: &mut R) -> bool {
    let p = model.params(cond).transition.p_detect(prev_detected);
    let u: f64 = rng.random();
    u < p
}

/// Draws `(eps_r, eps_theta)` for a detected object in `cond`.
pub fn sample_error<R: Rng + ?Sized>(model: &PemModel, cond: Condition, rng: &mut R) -> (f64, f64) {
    model.params(cond).error.sample(rng)
}

pub(crate) fn check_unique_ids(ids: impl IntoIterator<Item = u64>) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ModelError::DuplicateId(id));
        }
    }
    Ok(())
}

/// Runs one frame of the model over a ground-truth world.
///
/// Objects are processed in the order given. Ids not seen in the previous
/// frame start undetected before their first step, objects beyond the grid are
/// never detected, and `tracks` ends up holding exactly the ids of `world`.
/// On error `tracks` is left untouched.
pub fn apply<R: Rng + ?Sized>(
    model: &PemModel,
    world: &[GroundTruthObject],
    tracks: &mut TrackState,
    rng: &mut R,
) -> Result<Vec<PerceivedObject>, ModelError> {
    check_unique_ids(world.iter().map(|o| o.id))?;

    let mut next = BTreeMap::new();
    let mut perceived = Vec::new();
    for obj in world {
        let detected = match model.grid.condition_of(obj.position, obj.occlusion) {
            None => false,
            Some(cond) => {
                let prev = tracks.get(obj.id).unwrap_or(false);
                let v = step_detection(model, cond, prev, rng);
                if v {
                    let (eps_r, eps_theta) = sample_error(model, cond, rng);
                    perceived.push(PerceivedObject {
                        source_id: obj.id,
                        position: PolarCoord {
                            r: (obj.position.r * eps_r).max(MIN_PERCEIVED_RANGE),
                            theta: wrap_angle(obj.position.theta + eps_theta),
                        },
                    });
                }
                v
            }
        };
        next.insert(obj.id, detected);
    }
    tracks.detected = next;
    Ok(perceived)
}
