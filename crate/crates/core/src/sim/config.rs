use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

/// Relative size of the discarded discounted tail used for the default
/// truncation horizon.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replications: usize,
    pub horizon_periods: usize,
    pub seed: u64,
    pub discount: f64,
}

impl SimConfig {
    /// Horizon `ceil(log(tol) / log(alpha))`.
    pub fn default_horizon(alpha: f64) -> usize {
        (DEFAULT_TRUNCATION_TOL.ln() / alpha.ln()).ceil() as usize
    }

    pub fn new(discount: f64, replications: usize, seed: u64) -> Self {
        Self { replications, horizon_periods: Self::default_horizon(discount), seed, discount }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidParameter("need at least two replications".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidParameter(format!("discount {} outside (0, 1)", self.discount)));
        }
        if self.horizon_periods == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
    /// `alpha^T c_max / (1 - alpha)` with `c_max` the largest stage cost seen.
    pub truncation_bias_bound: f64,
}

impl CostEstimate {
    pub fn from_samples(samples: &[f64], bias_bound: f64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n as f64 - 1.0);
        Self { mean, std_error: (var / n as f64).sqrt(), replications: n, truncation_bias_bound: bias_bound }
    }

    /// `(mean - reference) / std_error`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.std_error
    }

    /// `key=value` summary line.
    pub fn summary(&self) -> String {
        format!(
            "mean={:e} std_error={:e} replications={} truncation_bias_bound={:e}",
            self.mean, self.std_error, self.replications, self.truncation_bias_bound
        )
    }
}
