use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{perception_metrics, PerceptionMetrics, SAFETY_DISTANCE_M};
use super::policy::PolicyConfig;
use super::runner::{run_once, EndReason, PerceptionSource, RunLog};
use super::scenario::{ScenarioId, ScenarioSpec};
use super::SimError;
use crate::pem::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub end: EndReason,
    pub min_distance: f64,
    pub duration_s: f64,
    pub metrics: Option<PerceptionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedRun {
    pub seed: u64,
    pub reason: String,
}

/// Aggregate of one (scenario, perception) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub scenario: ScenarioId,
    pub perception: String,
    pub baseline: bool,
    /// Grid of the model behind the perception source, when known locally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub base_seed: u64,
    pub n_runs: usize,
    pub n_aborted: usize,
    pub n_below_1m: usize,
    pub n_collisions: usize,
    /// Over completed runs; the two fractions sum to 1 when any run completed.
    pub frac_below_1m: f64,
    pub frac_at_least_1m: f64,
    /// Completed runs in seed order.
    pub runs: Vec<RunSummary>,
    pub aborted: Vec<AbortedRun>,
}

impl ExperimentCell {
    pub fn from_runs(
        scenario: ScenarioId,
        perception: String,
        baseline: bool,
        grid: Option<GridSpec>,
        base_seed: u64,
        runs: &[Result<RunSummary, AbortedRun>],
    ) -> Self {
        let done: Vec<&RunSummary> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
        let aborted: Vec<AbortedRun> = runs.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
        let below = done.iter().filter(|r| r.min_distance < SAFETY_DISTANCE_M).count();
        let (frac_below, frac_above) = if done.is_empty() {
            (0.0, 0.0)
        } else {
            let b = below as f64 / done.len() as f64;
            (b, 1.0 - b)
        };
        Self {
            scenario,
            perception,
            baseline,
            grid,
            base_seed,
            n_runs: runs.len(),
            n_aborted: aborted.len(),
            n_below_1m: below,
            n_collisions: done.iter().filter(|r| r.end == EndReason::Collision).count(),
            frac_below_1m: frac_below,
            frac_at_least_1m: frac_above,
            runs: done.into_iter().cloned().collect(),
            aborted,
        }
    }

    pub fn min_distances(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.min_distance).collect()
    }

    /// Runs without eligible perception ticks are skipped.
    pub fn detection_frequencies(&self) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| r.metrics.map(|m| m.relative_detection_frequency))
            .collect()
    }

    pub fn max_non_detection_intervals(&self) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| r.metrics.map(|m| m.max_non_detection_interval))
            .collect()
    }
}

pub fn summarize(log: &RunLog) -> RunSummary {
    RunSummary {
        seed: log.header.seed,
        end: log.header.outcome.end,
        min_distance: log.header.outcome.min_distance,
        duration_s: log.header.outcome.duration_s,
        metrics: perception_metrics(log),
    }
}

/// Runs seeds `base_seed..base_seed + n_runs` in parallel and aggregates in
/// seed order. `on_log` sees every completed run, e.g. to persist it.
pub fn run_experiment_with<F>(
    spec: &ScenarioSpec,
    policy: &PolicyConfig,
    source: &PerceptionSource,
    n_runs: usize,
    base_seed: u64,
    on_log: F,
) -> Result<(ExperimentCell, Vec<Result<RunSummary, AbortedRun>>), SimError>
where
    F: Fn(&RunLog) -> std::io::Result<()> + Sync,
{
    if n_runs == 0 {
        return Err(SimError::InvalidSpec("at least one run required".into()));
    }
    spec.validate().map_err(SimError::InvalidSpec)?;
    policy.validate().map_err(SimError::InvalidSpec)?;
    let runs: Vec<Result<Result<RunSummary, AbortedRun>, SimError>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed + k;
            match run_once(spec, policy, source, seed) {
                Ok(log) => {
                    on_log(&log)?;
                    Ok(Ok(summarize(&log)))
                }
                Err(e @ (SimError::Perception(_) | SimError::Remote(_))) => Ok(Err(AbortedRun {
                    seed,
                    reason: e.to_string(),
                })),
                Err(e) => Err(e),
            }
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let cell = ExperimentCell::from_runs(spec.id, source.label(), source.is_ground_truth(), source.grid(), base_seed, &runs);
    Ok((cell, runs))
}

pub fn run_experiment(
    spec: &ScenarioSpec,
    policy: &PolicyConfig,
    source: &PerceptionSource,
    n_runs: usize,
    base_seed: u64,
) -> Result<ExperimentCell, SimError> {
    run_experiment_with(spec, policy, source, n_runs, base_seed, |_| Ok(())).map(|r| r.0)
}
