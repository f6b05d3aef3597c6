//! Deterministic 2D scenario simulation for safety testing with perception
//! error models.
//!
//! The ego drives north along `x = 0` with a corridor-and-headway policy fed
//! by a perceived world refreshed at the perception rate. Three test cases
//! exercise a crossing pedestrian (TC1), a braking lead vehicle (TC2) and a
//! pedestrian hidden behind that lead vehicle (TC3).

mod actors;
mod experiment;
mod metrics;
mod occlusion;
mod policy;
mod report;
mod runner;
mod scenario;

pub use actors::{footprint_distance, footprints_overlap, ActorKind, ActorState};
pub use experiment::{run_experiment, run_experiment_with, summarize, AbortedRun, ExperimentCell, RunSummary};
pub use metrics::{
    detection_pattern, metrics_from_pattern, min_distance, perception_metrics, PerceptionMetrics, METRIC_RANGE_M,
    SAFETY_DISTANCE_M,
};
pub use occlusion::compute_occlusion;
pub use policy::{driving_policy, PolicyConfig, RelativeObject};
pub use report::ExperimentReport;
pub use runner::{run_once, EndReason, PerceptionRecord, PerceptionSource, RunHeader, RunLog, RunOutcome, TickRecord};
pub use scenario::{LeadScript, PedestrianScript, ScenarioId, ScenarioSpec};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid setup: {0}")]
    InvalidSpec(String),
    #[error("perception failed: {0}")]
    Perception(String),
    #[error("perception server: {0}")]
    Remote(#[from] crate::server::ClientError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
