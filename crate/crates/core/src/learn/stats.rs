use std::collections::HashMap;

use rayon::prelude::*;

use super::matching::match_frame;
use super::{LearnError, PerceptionDataset, Scene};
use crate::pem::{check_unique_ids, wrap_angle, GridSpec};

/// Sufficient statistics of one condition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionStats {
    /// `counts[k][l]`: transitions from detection state `k` to `l`.
    pub counts: [[u64; 2]; 2],
    /// `(eps_r, eps_theta)` of every matched observation.
    pub samples: Vec<(f64, f64)>,
}

impl ConditionStats {
    pub fn transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn merge(&mut self, other: ConditionStats) {
        for k in 0..2 {
            for l in 0..2 {
                self.counts[k][l] += other.counts[k][l];
            }
        }
        self.samples.extend(other.samples);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStats {
    pub grid: GridSpec,
    pub conditions: Vec<ConditionStats>,
}

impl PartitionStats {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            conditions: vec![ConditionStats::default(); grid.n_conditions()],
        }
    }

    pub fn total_transitions(&self) -> u64 {
        self.conditions.iter().map(|c| c.transitions()).sum()
    }

    pub fn total_samples(&self) -> usize {
        self.conditions.iter().map(|c| c.samples.len()).sum()
    }

    /// No condition holds a transition or an error sample.
    pub fn is_empty(&self) -> bool {
        self.total_transitions() == 0 && self.total_samples() == 0
    }

    /// Order-preserving merge: samples of `other` are appended after ours.
    pub fn merge(&mut self, other: PartitionStats) {
        for (a, b) in self.conditions.iter_mut().zip(other.conditions) {
            a.merge(b);
        }
    }
}

/// Counts detection transitions and collects position-error samples.
///
/// Each frame is matched independently. An object contributes a transition
/// only when it was also present in the previous frame of its scene, counted
/// in the condition it occupies at the later frame. Objects beyond the grid
/// contribute nothing.
pub fn accumulate_stats(dataset: &PerceptionDataset, grid: GridSpec, gate_m: f64) -> Result<PartitionStats, LearnError> {
    grid.validate()?;
    let per_scene: Vec<Result<PartitionStats, LearnError>> =
        dataset.scenes.par_iter().map(|s| scene_stats(s, grid, gate_m)).collect();
    let mut total = PartitionStats::new(grid);
    for s in per_scene {
        total.merge(s?);
    }
    Ok(total)
}

fn scene_stats(scene: &Scene, grid: GridSpec, gate_m: f64) -> Result<PartitionStats, LearnError> {
    let mut stats = PartitionStats::new(grid);
    let mut prev: HashMap<u64, bool> = HashMap::new();
    for frame in &scene.frames {
        check_unique_ids(frame.gt.iter().map(|o| o.id)).map_err(|e| {
            LearnError::InvalidDataset(format!("scene {} at t={}: {e}", scene.name, frame.t))
        })?;
        let m = match_frame(&frame.gt, &frame.detections, gate_m);
        let mut matched = vec![None; frame.gt.len()];
        for &(i, j, _) in &m.pairs {
            matched[i] = Some(j);
        }
        let mut current = HashMap::with_capacity(frame.gt.len());
        for (obj, det) in frame.gt.iter().zip(&matched) {
            let detected = det.is_some();
            current.insert(obj.id, detected);
            let Some(cond) = grid.condition_of(obj.position, obj.occlusion) else {
                continue;
            };
            let cs = &mut stats.conditions[grid.condition_index(cond)];
            if let Some(&was) = prev.get(&obj.id) {
                cs.counts[was as usize][detected as usize] += 1;
            }
            if let Some(j) = *det {
                if obj.position.r > 0.0 {
                    let d = frame.detections[j];
                    cs.samples
                        .push((d.r / obj.position.r, wrap_angle(d.theta - obj.position.theta)));
                }
            }
        }
        prev = current;
    }
    Ok(stats)
}
