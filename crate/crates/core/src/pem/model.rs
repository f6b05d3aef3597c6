use rand::Rng;
use rand_distr::StandardNormal;

use super::{Condition, GridSpec, ModelError};

/// Two-state detection chain. Only the transitions into the detected state
/// are stored; `a00 = 1 - a01` and `a10 = 1 - a11`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub a01: f64,
    pub a11: f64,
}

impl TransitionMatrix {
    pub fn new(a01: f64, a11: f64) -> Self {
        Self { a01, a11 }
    }

    pub fn a00(&self) -> f64 {
        1.0 - self.a01
    }

    pub fn a10(&self) -> f64 {
        1.0 - self.a11
    }

    /// Probability of being detected next, given the previous state.
    pub fn p_detect(&self, prev_detected: bool) -> f64 {
        if prev_detected {
            self.a11
        } else {
            self.a01
        }
    }

    /// Long-run detection frequency `a01 / (1 + a01 - a11)`.
    ///
    /// The degenerate chain `a01 = 0, a11 = 1` keeps its initial state; objects
    /// start undetected, so it reports 0.
    pub fn stationary_detection(&self) -> f64 {
        let denom = 1.0 + self.a01 - self.a11;
        if denom <= 0.0 {
            0.0
        } else {
            self.a01 / denom
        }
    }

    pub(crate) fn validate(&self, index: usize) -> Result<(), ModelError> {
        check_unit(index, "a01", self.a01)?;
        check_unit(index, "a11", self.a11)
    }
}

fn check_unit(index: usize, field: &'static str, v: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            index,
            field,
            reason: format!("out of [0,1] (got {v})"),
        })
    }
}

/// Bivariate Gaussian over `(eps_r, eps_theta)`: the radial ratio
/// `r_perceived / r` and the bearing offset in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDistribution {
    pub mu_r: f64,
    pub mu_theta: f64,
    pub sigma_r: f64,
    pub sigma_theta: f64,
    pub rho: f64,
}

impl ErrorDistribution {
    /// Standard deviation used to represent an error-free sensor. Any draw
    /// scaled by it vanishes against unit-scale means in double precision.
    pub const NEGLIGIBLE_SIGMA: f64 = 1e-300;

    pub fn identity() -> Self {
        Self {
            mu_r: 1.0,
            mu_theta: 0.0,
            sigma_r: Self::NEGLIGIBLE_SIGMA,
            sigma_theta: Self::NEGLIGIBLE_SIGMA,
            rho: 0.0,
        }
    }

    /// Covariance `diag(s) [[1, rho], [rho, 1]] diag(s)` as row-major 2x2.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let off = self.rho * self.sigma_r * self.sigma_theta;
        [[self.sigma_r * self.sigma_r, off], [off, self.sigma_theta * self.sigma_theta]]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let eps_r = self.mu_r + self.sigma_r * z1;
        let eps_theta = self.mu_theta + self.sigma_theta * (self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * z2);
        (eps_r, eps_theta)
    }

    pub(crate) fn validate(&self, index: usize) -> Result<(), ModelError> {
        let err = |field, reason: String| Err(ModelError::InvalidParameter { index, field, reason });
        if !self.mu_r.is_finite() {
            return err("mu_r", format!("must be finite (got {})", self.mu_r));
        }
        if !self.mu_theta.is_finite() {
            return err("mu_theta", format!("must be finite (got {})", self.mu_theta));
        }
        if !(self.sigma_r.is_finite() && self.sigma_r > 0.0) {
            return err("sigma_r", format!("must be positive (got {})", self.sigma_r));
        }
        if !(self.sigma_theta.is_finite() && self.sigma_theta > 0.0) {
            return err("sigma_theta", format!("must be positive (got {})", self.sigma_theta));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return err("rho", format!("out of (-1,1) (got {})", self.rho));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionParams {
    pub transition: TransitionMatrix,
    pub error: ErrorDistribution,
}

impl ConditionParams {
    pub fn perfect() -> Self {
        Self {
            transition: TransitionMatrix::new(1.0, 1.0),
            error: ErrorDistribution::identity(),
        }
    }

    pub fn never_detect() -> Self {
        Self {
            transition: TransitionMatrix::new(0.0, 0.0),
            error: ErrorDistribution::identity(),
        }
    }
}

/// A learned perception error model: one parameter pair per condition,
/// indexed occlusion-major as defined by [`GridSpec::condition_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct PemModel {
    pub metadata: String,
    pub grid: GridSpec,
    conditions: Vec<ConditionParams>,
}

impl PemModel {
    pub fn new(metadata: impl Into<String>, grid: GridSpec, conditions: Vec<ConditionParams>) -> Result<Self, ModelError> {
        let m = Self {
            metadata: metadata.into(),
            grid,
            conditions,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(metadata: impl Into<String>, grid: GridSpec, params: ConditionParams) -> Result<Self, ModelError> {
        grid.validate()?;
        Self::new(metadata, grid, vec![params; grid.n_conditions()])
    }

    /// Detects everything in range immediately and reports it without error.
    pub fn perfect(grid: GridSpec) -> Self {
        Self::uniform("perfect", grid, ConditionParams::perfect()).expect("default parameters are valid")
    }

    pub fn never_detect(grid: GridSpec) -> Self {
        Self::uniform("never-detect", grid, ConditionParams::never_detect()).expect("default parameters are valid")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.grid.validate()?;
        let expected = self.grid.n_conditions();
        if self.conditions.len() != expected {
            return Err(ModelError::ConditionCount {
                expected,
                found: self.conditions.len(),
            });
        }
        for (i, p) in self.conditions.iter().enumerate() {
            p.transition.validate(i)?;
            p.error.validate(i)?;
        }
        Ok(())
    }

    pub fn conditions(&self) -> &[ConditionParams] {
        &self.conditions
    }

    pub fn params(&self, c: Condition) -> &ConditionParams {
        &self.conditions[self.grid.condition_index(c)]
    }

    pub fn params_at(&self, index: usize) -> &ConditionParams {
        &self.conditions[index]
    }

    /// Replaces the parameters of one condition, re-checking invariants.
    pub fn set_params(&mut self, c: Condition, params: ConditionParams) -> Result<(), ModelError> {
        let i = self.grid.condition_index(c);
        params.transition.validate(i)?;
        params.error.validate(i)?;
        self.conditions[i] = params;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn implied_rows_sum_to_one() {
        let t = TransitionMatrix::new(0.3, 0.9);
        assert!((t.a00() + t.a01 - 1.0).abs() < 1e-15);
        assert!((t.a10() + t.a11 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_probability() {
        assert_eq!(TransitionMatrix::new(0.25, 0.75).stationary_detection(), 0.5);
        assert_eq!(TransitionMatrix::new(1.0, 1.0).stationary_detection(), 1.0);
        assert_eq!(TransitionMatrix::new(0.0, 0.0).stationary_detection(), 0.0);
        assert_eq!(TransitionMatrix::new(0.0, 1.0).stationary_detection(), 0.0);
    }

    #[test]
    fn covariance_matches_scaled_correlation() {
        let e = ErrorDistribution {
            mu_r: 1.0,
            mu_theta: 0.0,
            sigma_r: 0.2,
            sigma_theta: 0.05,
            rho: -0.5,
        };
        let c = e.covariance();
        assert!((c[0][0] - 0.04).abs() < 1e-15);
        assert!((c[1][1] - 0.0025).abs() < 1e-15);
        assert!((c[0][1] + 0.005).abs() < 1e-15);
        assert_eq!(c[0][1], c[1][0]);
        // positive definite
        assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0);
    }

    #[test]
    fn identity_error_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (er, et) = ErrorDistribution::identity().sample(&mut rng);
            assert_eq!(42.0 * er, 42.0);
            assert_eq!(0.7 + et, 0.7);
        }
    }

    #[test]
    fn rejects_out_of_range_transition() {
        let mut p = ConditionParams::perfect();
        p.transition.a11 = 1.2;
        let err = PemModel::uniform("x", GridSpec::default(), p).unwrap_err();
        assert!(err.to_string().contains("a11 out of [0,1]"), "{err}");
    }

    #[test]
    fn rejects_wrong_condition_count() {
        let err = PemModel::new("x", GridSpec::default(), vec![ConditionParams::perfect(); 3]).unwrap_err();
        assert!(matches!(err, ModelError::ConditionCount { expected: 480, found: 3 }));
    }
}
