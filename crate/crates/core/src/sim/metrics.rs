use serde::{Deserialize, Serialize};

use super::actors::footprint_distance;
use super::runner::RunLog;

/// Obstacles farther than this from the ego do not count toward perception
/// metrics.
pub const METRIC_RANGE_M: f64 = 100.0;

/// Values below this count as a collision.
pub const SAFETY_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionMetrics {
    pub relative_detection_frequency: f64,
    /// Seconds.
    pub max_non_detection_interval: f64,
    pub eligible_ticks: usize,
}

/// Smallest footprint distance between the ego and any other actor over the
/// run.
pub fn min_distance(log: &RunLog) -> f64 {
    log.ticks
        .iter()
        .flat_map(|t| t.actors[1..].iter().map(move |a| footprint_distance(&t.actors[0], a)))
        .fold(f64::INFINITY, f64::min)
}

/// Per perception tick of the scored obstacle: `Some(detected)` while its
/// center is within [`METRIC_RANGE_M`] of the ego's, `None` otherwise.
pub fn detection_pattern(log: &RunLog) -> Vec<Option<bool>> {
    let k = log.header.primary_obstacle;
    log.ticks
        .iter()
        .filter_map(|t| {
            let p = t.perception.as_ref()?;
            let (e, o) = (&t.actors[0], &t.actors[k]);
            Some(((o.x - e.x).hypot(o.y - e.y) <= METRIC_RANGE_M).then_some(p.detected[k]))
        })
        .collect()
}

/// Detection frequency over eligible ticks and the longest run of consecutive
/// eligible misses times `period_s`. An ineligible tick ends a run. `None`
/// without eligible ticks.
pub fn metrics_from_pattern(pattern: &[Option<bool>], period_s: f64) -> Option<PerceptionMetrics> {
    let mut eligible = 0usize;
    let mut hits = 0usize;
    let mut run = 0usize;
    let mut longest = 0usize;
    for p in pattern {
        match p {
            Some(true) => {
                eligible += 1;
                hits += 1;
                run = 0;
            }
            Some(false) => {
                eligible += 1;
                run += 1;
                longest = longest.max(run);
            }
            None => run = 0,
        }
    }
    (eligible > 0).then(|| PerceptionMetrics {
        relative_detection_frequency: hits as f64 / eligible as f64,
        max_non_detection_interval: longest as f64 * period_s,
        eligible_ticks: eligible,
    })
}

pub fn perception_metrics(log: &RunLog) -> Option<PerceptionMetrics> {
    metrics_from_pattern(&detection_pattern(log), 1.0 / log.header.perception_rate_hz)
}
