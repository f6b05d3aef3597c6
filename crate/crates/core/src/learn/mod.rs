//! Learning a perception error model from paired ground-truth/detection
//! streams.
//!
//! The pipeline matches each frame, accumulates per-condition transition
//! counts and error samples, forms per-condition estimates and smooths every
//! parameter field over the grid with [`fit_car`].

mod car;
mod dataset;
mod matching;
mod mle;
mod stats;
mod synth;

pub use car::{build_adjacency, fit_car, Adjacency, CarFit, CarSpec, FieldScale, Observation};
pub use dataset::{read_dataset, write_dataset, Frame, PerceptionDataset, Scene, DEFAULT_FRAME_RATE_HZ};
pub use matching::{match_frame, match_positions, FrameMatch, DEFAULT_GATE_M};
pub use mle::{estimate_mle, MleEstimate, RawField};
pub use stats::{accumulate_stats, ConditionStats, PartitionStats};
pub use synth::{synthesize_dataset, Motion, SyntheticDatasetConfig};

use rayon::prelude::*;

use crate::pem::{ConditionParams, ErrorDistribution, GridSpec, ModelError, PemModel, TransitionMatrix};

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("dataset line {line}: {message}")]
    DatasetLine { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("no observations: no condition holds any data")]
    NoObservations,
    #[error("invalid adjacency: {0}")]
    InvalidAdjacency(String),
    #[error("invalid smoothing setup: {0}")]
    InvalidCarSpec(String),
    #[error("smoothing did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("field {field}: {source}")]
    Field {
        field: &'static str,
        #[source]
        source: Box<LearnError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// The seven parameter fields, in model order.
pub const FIELD_NAMES: [&str; 7] = ["a01", "a11", "mu_r", "mu_theta", "sigma_r", "sigma_theta", "rho"];

const MIN_VARIANCE: f64 = 1e-8;
const MIN_SIGMA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiagnostics {
    pub field: &'static str,
    pub n_observed: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub tau: f64,
    pub stalled: bool,
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub model: PemModel,
    pub stats: PartitionStats,
    pub diagnostics: Vec<FieldDiagnostics>,
}

/// Matches the dataset with the default gate and fits all seven fields.
pub fn learn_pem(dataset: &PerceptionDataset, grid: GridSpec, spec: &CarSpec) -> Result<LearnOutput, LearnError> {
    learn_pem_gated(dataset, grid, spec, DEFAULT_GATE_M)
}

pub fn learn_pem_gated(
    dataset: &PerceptionDataset,
    grid: GridSpec,
    spec: &CarSpec,
    gate_m: f64,
) -> Result<LearnOutput, LearnError> {
    if dataset.is_empty() {
        return Err(LearnError::NoObservations);
    }
    let stats = accumulate_stats(dataset, grid, gate_m)?;
    let metadata = format!(
        "learned from {} scenes, {} frames at {} Hz",
        dataset.scenes.len(),
        dataset.n_frames(),
        dataset.frame_rate_hz
    );
    learn_from_stats(stats, spec, metadata)
}

pub fn learn_from_stats(stats: PartitionStats, spec: &CarSpec, metadata: String) -> Result<LearnOutput, LearnError> {
    if stats.is_empty() {
        return Err(LearnError::NoObservations);
    }
    let observations = field_observations(&stats);
    let fits: Vec<Result<CarFit, LearnError>> = observations
        .par_iter()
        .zip(FIELD_NAMES.par_iter())
        .map(|((obs, scale), &field)| {
            fit_car(obs, *scale, spec).map_err(|e| LearnError::Field {
                field,
                source: Box::new(e),
            })
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = stats.conditions.len();
    let conditions = (0..n)
        .map(|c| ConditionParams {
            transition: TransitionMatrix::new(fits[0].values[c], fits[1].values[c]),
            error: ErrorDistribution {
                mu_r: fits[2].values[c],
                mu_theta: fits[3].values[c],
                sigma_r: fits[4].values[c],
                sigma_theta: fits[5].values[c],
                rho: fits[6].values[c],
            },
        })
        .collect();
    let model = PemModel::new(metadata, stats.grid, conditions)?;
    let diagnostics = fits
        .iter()
        .zip(&observations)
        .zip(FIELD_NAMES)
        .map(|((fit, (obs, _)), field)| FieldDiagnostics {
            field,
            n_observed: obs.iter().filter(|o| !o.is_empty()).count(),
            iterations: fit.iterations,
            grad_norm: fit.grad_norm,
            tau: fit.tau,
            stalled: fit.stalled,
        })
        .collect();
    Ok(LearnOutput {
        model,
        stats,
        diagnostics,
    })
}

/// Per-field data terms for the smoother, in [`FIELD_NAMES`] order.
///
/// Transition fields use the raw counts. Means get a Gaussian term with the
/// precision of a sample mean, falling back to the pooled variance when a
/// condition has a single sample. Standard deviations and correlations use the
/// large-sample precision of `ln s` and of Fisher's z.
pub fn field_observations(stats: &PartitionStats) -> Vec<(Vec<Observation>, FieldScale)> {
    let est = estimate_mle(stats);
    let binomial = |pick: fn(&[[u64; 2]; 2]) -> (u64, u64)| -> Vec<Observation> {
        stats
            .conditions
            .iter()
            .map(|cs| {
                let (s, n) = pick(&cs.counts);
                if n == 0 {
                    Observation::Empty
                } else {
                    Observation::Binomial {
                        successes: s as f64,
                        trials: n as f64,
                    }
                }
            })
            .collect()
    };
    let a01 = binomial(|w| (w[0][1], w[0][0] + w[0][1]));
    let a11 = binomial(|w| (w[1][1], w[1][0] + w[1][1]));

    let pooled = |sigma: &RawField| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, s) in sigma.values.iter().enumerate() {
            if !sigma.empty[c] {
                let dof = est.n_samples[c] as f64 - 1.0;
                num += dof * s * s;
                den += dof;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    };
    let mean_field = |mu: &RawField, sigma: &RawField| -> Vec<Observation> {
        let fallback = pooled(sigma).max(MIN_VARIANCE);
        (0..mu.values.len())
            .map(|c| {
                if mu.empty[c] {
                    return Observation::Empty;
                }
                let var = if sigma.empty[c] {
                    fallback
                } else {
                    (sigma.values[c] * sigma.values[c]).max(MIN_VARIANCE)
                };
                Observation::Gaussian {
                    value: mu.values[c],
                    precision: est.n_samples[c] as f64 / var,
                }
            })
            .collect()
    };
    let sigma_field = |sigma: &RawField| -> Vec<Observation> {
        (0..sigma.values.len())
            .map(|c| {
                if sigma.empty[c] {
                    Observation::Empty
                } else {
                    Observation::Gaussian {
                        value: sigma.values[c].max(MIN_SIGMA),
                        precision: 2.0 * (est.n_samples[c] as f64 - 1.0),
                    }
                }
            })
            .collect()
    };
    let rho = (0..est.rho.values.len())
        .map(|c| {
            if est.rho.empty[c] {
                Observation::Empty
            } else {
                Observation::Gaussian {
                    value: est.rho.values[c],
                    precision: (est.n_samples[c] as f64 - 3.0).max(1.0),
                }
            }
        })
        .collect();

    vec![
        (a01, FieldScale::Probability),
        (a11, FieldScale::Probability),
        (mean_field(&est.mu_r, &est.sigma_r), FieldScale::Real),
        (mean_field(&est.mu_theta, &est.sigma_theta), FieldScale::Real),
        (sigma_field(&est.sigma_r), FieldScale::Positive),
        (sigma_field(&est.sigma_theta), FieldScale::Positive),
        (rho, FieldScale::Correlation),
    ]
}
