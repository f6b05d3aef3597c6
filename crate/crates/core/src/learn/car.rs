//! Spatial smoothing of per-condition parameter fields.
//!
//! Each field is a latent vector `y` over conditions with a proper
//! conditional autoregressive prior
//!
//! ```text
//! y_c | y_-c ~ N(alpha * mean_{n ~ c} y_n, 1 / (tau * d_c))
//! ```
//!
//! where `n ~ c` ranges over grid cells sharing an edge with `c` at the same
//! occlusion level and `d_c` is the number of such neighbors. Jointly this is
//! `y ~ N(0, (tau * (D - alpha * B))^-1)` with `B` the 0/1 adjacency. The
//! precision `tau` carries a Gamma prior. The fit returns the joint posterior
//! mode over `(y, tau)`; `tau` is profiled out in closed form, leaving
//!
//! ```text
//! f(y) = sum_c loss_c(y_c) + a * ln(rate + q(y) / 2),   q(y) = y' (D - alpha B) y
//! ```
//!
//! with `a = rank/2 + shape - 1`. `f` is minimized with damped Newton steps.
//!
//! Fields are fitted on an unconstrained scale: log-odds for probabilities,
//! log for standard deviations, Fisher z for correlations.

use nalgebra::{DMatrix, DVector};

use super::LearnError;
use crate::pem::GridSpec;

/// Symmetric 0/1 neighbor structure over conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Builds an adjacency from neighbor lists, checking symmetry and the
    /// absence of self loops.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Result<Self, LearnError> {
        let n = neighbors.len();
        for (c, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.contains(&c) {
                return Err(LearnError::InvalidAdjacency(format!("self loop at {c}")));
            }
            if let Some(&bad) = list.iter().find(|&&m| m >= n) {
                return Err(LearnError::InvalidAdjacency(format!("{c} links to missing node {bad}")));
            }
        }
        for c in 0..n {
            for &m in &neighbors[c] {
                if neighbors[m].binary_search(&c).is_err() {
                    return Err(LearnError::InvalidAdjacency(format!("{c} -> {m} is not symmetric")));
                }
            }
        }
        Ok(Self { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, c: usize) -> &[usize] {
        &self.neighbors[c]
    }

    pub fn degree(&self, c: usize) -> usize {
        self.neighbors[c].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                for &m in &self.neighbors[comp[i]] {
                    if !seen[m] {
                        seen[m] = true;
                        comp.push(m);
                    }
                }
                i += 1;
            }
            out.push(comp);
        }
        out
    }
}

/// Conditions are adjacent when they share an occlusion level and their grid
/// cells share an edge: neighboring sectors of one ring (wrapping around) or
/// neighboring rings of one sector.
pub fn build_adjacency(grid: &GridSpec) -> Adjacency {
    let (nr, ns) = (grid.n_rings(), grid.n_sectors());
    let neighbors = (0..grid.n_conditions())
        .map(|i| {
            let c = grid.condition_at(i).expect("index in range");
            let mut list = Vec::with_capacity(4);
            let mut push = |ring: usize, sector: usize| {
                let j = grid.condition_index(crate::pem::Condition {
                    occlusion: c.occlusion,
                    ring,
                    sector,
                });
                if j != i {
                    list.push(j);
                }
            };
            if ns > 1 {
                push(c.ring, (c.sector + 1) % ns);
                push(c.ring, (c.sector + ns - 1) % ns);
            }
            if c.ring > 0 {
                push(c.ring - 1, c.sector);
            }
            if c.ring + 1 < nr {
                push(c.ring + 1, c.sector);
            }
            list
        })
        .collect();
    Adjacency::from_neighbors(neighbors).expect("grid adjacency is symmetric")
}

/// Domain of a parameter field and the scale it is smoothed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldScale {
    /// `[0, 1]`, smoothed on log-odds.
    Probability,
    /// Unbounded, smoothed as is.
    Real,
    /// `(0, inf)`, smoothed on the log scale.
    Positive,
    /// `(-1, 1)`, smoothed on Fisher z.
    Correlation,
}

const MIN_POSITIVE: f64 = 1e-9;
const MAX_ABS_CORRELATION: f64 = 0.999;

impl FieldScale {
    pub fn to_latent(self, v: f64) -> f64 {
        match self {
            Self::Probability => {
                let p = v.clamp(1e-9, 1.0 - 1e-9);
                (p / (1.0 - p)).ln()
            }
            Self::Real => v,
            Self::Positive => v.max(MIN_POSITIVE).ln(),
            Self::Correlation => v.clamp(-MAX_ABS_CORRELATION, MAX_ABS_CORRELATION).atanh(),
        }
    }

    pub fn from_latent(self, y: f64) -> f64 {
        match self {
            Self::Probability => logistic(y),
            Self::Real => y,
            Self::Positive => y.exp().max(f64::MIN_POSITIVE),
            Self::Correlation => y.tanh().clamp(-1.0 + 1e-12, 1.0 - 1e-12),
        }
    }
}

fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// Data attached to one condition of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Empty,
    /// Binomial counts; the latent value is the log-odds of success.
    Binomial { successes: f64, trials: f64 },
    /// A point estimate on the natural scale with its precision on the
    /// latent scale.
    Gaussian { value: f64, precision: f64 },
}

impl Observation {
    pub fn is_empty(&self) -> bool {
        match *self {
            Self::Empty => true,
            Self::Binomial { trials, .. } => trials <= 0.0,
            Self::Gaussian { precision, .. } => precision <= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarSpec {
    /// Spatial dependence in `(0, 1]`; 1 gives the intrinsic model.
    pub alpha: f64,
    pub adjacency: Adjacency,
    /// Gamma prior on the precision, shape/rate parameterization.
    pub prior_shape: f64,
    pub prior_rate: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl CarSpec {
    pub const DEFAULT_ALPHA: f64 = 0.95;

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::with_adjacency(build_adjacency(grid))
    }

    pub fn with_adjacency(adjacency: Adjacency) -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
            adjacency,
            prior_shape: 1.0,
            prior_rate: 1.0,
            max_iter: 10_000,
            grad_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnError::InvalidCarSpec(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(self.prior_shape > 0.0 && self.prior_rate > 0.0) {
            return Err(LearnError::InvalidCarSpec("precision prior needs positive shape and rate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarFit {
    /// Smoothed field on the natural scale.
    pub values: Vec<f64>,
    pub latent: Vec<f64>,
    /// Posterior mode of the prior precision.
    pub tau: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Stopped because a Newton step no longer changed the iterate in double
    /// precision, with the gradient above tolerance.
    pub stalled: bool,
}

struct Problem<'a> {
    obs: Vec<Observation>,
    spec: &'a CarSpec,
    diag: Vec<f64>,
    shape_eff: f64,
}

impl<'a> Problem<'a> {
    fn new(obs: &[Observation], scale: FieldScale, spec: &'a CarSpec) -> Self {
        let adj = &spec.adjacency;
        let n = adj.len();
        let obs = obs
            .iter()
            .map(|o| match *o {
                Observation::Gaussian { value, precision } if precision > 0.0 => Observation::Gaussian {
                    value: scale.to_latent(value),
                    precision,
                },
                Observation::Binomial { successes, trials } if trials > 0.0 => {
                    Observation::Binomial { successes, trials }
                }
                _ => Observation::Empty,
            })
            .collect();
        // isolated conditions keep a unit diagonal so the prior stays proper
        let diag: Vec<f64> = (0..n).map(|c| adj.degree(c).max(1) as f64).collect();
        let rank = if spec.alpha < 1.0 {
            n
        } else {
            // one null direction per connected component with edges
            n - adj.components().iter().filter(|c| c.len() > 1).count()
        };
        Self {
            obs,
            spec,
            diag,
            shape_eff: rank as f64 / 2.0 + spec.prior_shape - 1.0,
        }
    }

    fn prior_product(&self, y: &[f64]) -> Vec<f64> {
        let adj = &self.spec.adjacency;
        (0..y.len())
            .map(|c| {
                let s: f64 = adj.neighbors(c).iter().map(|&m| y[m]).sum();
                self.diag[c] * y[c] - self.spec.alpha * s
            })
            .collect()
    }

    fn tau(&self, q: f64) -> f64 {
        self.shape_eff.max(0.0) / (self.spec.prior_rate + 0.5 * q)
    }

    /// Objective, gradient, data curvature and the profiled precision.
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<f64>, f64) {
        let qy = self.prior_product(y);
        let q: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
        let tau = self.tau(q);
        let mut f = self.shape_eff.max(0.0) * (self.spec.prior_rate + 0.5 * q).ln();
        let mut grad: Vec<f64> = qy.iter().map(|v| tau * v).collect();
        let mut curv = vec![0.0; y.len()];
        for (c, o) in self.obs.iter().enumerate() {
            match *o {
                Observation::Empty => {}
                Observation::Binomial { successes, trials } => {
                    f += trials * softplus(y[c]) - successes * y[c];
                    let p = logistic(y[c]);
                    grad[c] += trials * p - successes;
                    curv[c] = trials * p * (1.0 - p);
                }
                Observation::Gaussian { value, precision } => {
                    let d = y[c] - value;
                    f += 0.5 * precision * d * d;
                    grad[c] += precision * d;
                    curv[c] = precision;
                }
            }
        }
        (f, grad, curv, tau)
    }

    fn objective(&self, y: &[f64]) -> f64 {
        let qy = self.prior_product(y);
        let q: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
        let mut f = self.shape_eff.max(0.0) * (self.spec.prior_rate + 0.5 * q).ln();
        for (c, o) in self.obs.iter().enumerate() {
            match *o {
                Observation::Empty => {}
                Observation::Binomial { successes, trials } => f += trials * softplus(y[c]) - successes * y[c],
                Observation::Gaussian { value, precision } => {
                    let d = y[c] - value;
                    f += 0.5 * precision * d * d;
                }
            }
        }
        f
    }

    fn initial(&self) -> Vec<f64> {
        self.obs
            .iter()
            .map(|o| match *o {
                Observation::Empty => 0.0,
                Observation::Binomial { successes, trials } => ((successes + 0.5) / (trials - successes + 0.5)).ln(),
                Observation::Gaussian { value, .. } => value,
            })
            .collect()
    }

    fn newton_direction(&self, grad: &[f64], curv: &[f64], tau: f64) -> Option<Vec<f64>> {
        let n = grad.len();
        let adj = &self.spec.adjacency;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            h[(c, c)] = tau * self.diag[c] + curv[c];
            for &m in adj.neighbors(c) {
                h[(c, m)] = -tau * self.spec.alpha;
            }
        }
        let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
        let scale = (0..n).map(|c| h[(c, c)].abs()).fold(0.0, f64::max).max(1.0);
        let mut ridge = 0.0;
        for _ in 0..8 {
            let mut hr = h.clone();
            for c in 0..n {
                hr[(c, c)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                return Some(ch.solve(&rhs).iter().copied().collect());
            }
            ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
        }
        None
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Posterior-mode estimate of a field under the CAR prior.
pub fn fit_car(obs: &[Observation], scale: FieldScale, spec: &CarSpec) -> Result<CarFit, LearnError> {
    spec.validate()?;
    if obs.len() != spec.adjacency.len() {
        return Err(LearnError::InvalidCarSpec(format!(
            "field has {} conditions, adjacency has {}",
            obs.len(),
            spec.adjacency.len()
        )));
    }
    let problem = Problem::new(obs, scale, spec);
    let mut y = problem.initial();
    let mut stalled = false;
    let mut iterations = 0;
    let mut idle = 0;
    let (mut f, mut grad, mut curv, mut tau) = problem.eval(&y);
    let mut gnorm = norm(&grad);
    while gnorm >= spec.grad_tol {
        if iterations >= spec.max_iter {
            return Err(LearnError::NotConverged {
                iterations,
                grad_norm: gnorm,
            });
        }
        iterations += 1;
        let dir = problem
            .newton_direction(&grad, &curv, tau)
            .unwrap_or_else(|| grad.iter().map(|g| -g).collect());
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        // objective differences below this are rounding noise
        let f_noise = 1e-12 * (1.0 + f.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let ft = problem.objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some(problem.eval(&trial)).map(|e| (trial, e));
                break;
            }
            if step == 1.0 && (ft - f).abs() <= f_noise {
                // near the optimum the objective cannot rank the iterates; use
                // the gradient instead
                let e = problem.eval(&trial);
                if norm(&e.1) < gnorm {
                    accepted = Some((trial, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, e)) = accepted else {
            let scale_y = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax <= 1e-9 * scale_y || slope.abs() <= f_noise {
                stalled = true;
                break;
            }
            return Err(LearnError::NotConverged {
                iterations,
                grad_norm: gnorm,
            });
        };
        let next_norm = norm(&e.1);
        let progress = next_norm < 0.999 * gnorm || f - e.0 > f_noise;
        idle = if progress { 0 } else { idle + 1 };
        y = next;
        (f, grad, curv, tau) = e;
        gnorm = next_norm;
        if idle >= 5 {
            stalled = true;
            break;
        }
    }
    Ok(CarFit {
        values: y.iter().map(|&v| scale.from_latent(v)).collect(),
        grad_norm: gnorm,
        latent: y,
        tau,
        iterations,
        stalled,
    })
}
