use crate::error::{Error, Result};

/// Variance schedule of the disturbance array for one weather coordinate:
/// `var eps_{n+j}(n) = sigma2 * gamma^(2j)` for `j <= trunc_lag`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSchedule {
    sigma2: f64,
    gamma: f64,
    mean_z: f64,
    trunc_lag: usize,
}

/// Relative variance mass allowed beyond the truncation lag.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

impl DisturbanceSchedule {
    pub fn new(sigma2: f64, gamma: f64, mean_z: f64, trunc_lag: usize) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if !mean_z.is_finite() {
            return Err(Error::InvalidParameter("mean_z must be finite".into()));
        }
        if trunc_lag < 1 {
            return Err(Error::InvalidParameter("trunc_lag must be at least 1".into()));
        }
        Ok(Self { sigma2, gamma, mean_z, trunc_lag })
    }

    /// Uses [`default_trunc_lag`](Self::default_trunc_lag).
    pub fn with_default_lag(sigma2: f64, gamma: f64, mean_z: f64) -> Result<Self> {
        Self::new(sigma2, gamma, mean_z, Self::default_trunc_lag(gamma))
    }

    /// `ceil(log(1e-12) / (2 log gamma))`, at least 1.
    pub fn default_trunc_lag(gamma: f64) -> usize {
        if gamma <= 0.0 {
            return 1;
        }
        let lag = (DEFAULT_TAIL_MASS.ln() / (2.0 * gamma.ln())).ceil();
        (lag as usize).max(1)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mean_z(&self) -> f64 {
        self.mean_z
    }

    pub fn trunc_lag(&self) -> usize {
        self.trunc_lag
    }

    /// Variance of an entry revealed `lookahead` periods before its target.
    pub fn variance(&self, lookahead: i64) -> f64 {
        if lookahead < 0 || lookahead as usize > self.trunc_lag {
            0.0
        } else {
            self.sigma2 * self.gamma.powi(2 * lookahead as i32)
        }
    }

    pub fn std_dev(&self, lookahead: i64) -> f64 {
        self.variance(lookahead).sqrt()
    }

    /// `sum_{j=from}^{to} var eps(j)`, clipped to the truncation lag.
    pub fn variance_sum(&self, from: i64, to: i64) -> f64 {
        let lo = from.max(0);
        let hi = to.min(self.trunc_lag as i64);
        (lo..=hi).map(|j| self.variance(j)).sum()
    }

    /// Variance of the centred one-step innovation, `var Z_0`.
    pub fn innovation_variance(&self) -> f64 {
        self.variance_sum(0, self.trunc_lag as i64)
    }

    /// Variance revealed at lookaheads `>= from`.
    pub fn tail_variance(&self, from: i64) -> f64 {
        self.variance_sum(from, self.trunc_lag as i64)
    }

    /// Conditional variance of `Z_{n+1}(G_k)` given `G_k`, with `steps = n - k`.
    ///
    /// This is the uncertainty plume: `sigma2 * sum_{j=0}^{steps} gamma^(2j)`.
    pub fn plume_variance(&self, steps: i64) -> f64 {
        self.variance_sum(0, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_variances_sum_to_innovation_variance() {
        let s = DisturbanceSchedule::new(2.0, 0.8, 0.0, 12).unwrap();
        let closed = 2.0 * (1.0 - 0.8f64.powi(2 * 13)) / (1.0 - 0.64);
        assert!((s.innovation_variance() - closed).abs() < 1e-12);
        assert_eq!(s.variance(13), 0.0);
        assert_eq!(s.variance(-1), 0.0);
        assert!((s.variance(3) - 2.0 * 0.8f64.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn default_lag_bounds_discarded_mass() {
        for &gamma in &[0.3, 0.6, 0.95, 0.99] {
            let lag = DisturbanceSchedule::default_trunc_lag(gamma);
            let discarded = gamma.powi(2 * (lag as i32 + 1)) / (1.0 - gamma * gamma);
            assert!(discarded <= 1e-12 / (1.0 - gamma * gamma) + 1e-300);
        }
        assert_eq!(DisturbanceSchedule::default_trunc_lag(0.0), 1);
        assert_eq!(DisturbanceSchedule::default_trunc_lag(0.95), 270);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DisturbanceSchedule::new(-1.0, 0.5, 0.0, 3).is_err());
        assert!(DisturbanceSchedule::new(1.0, 1.0, 0.0, 3).is_err());
        assert!(DisturbanceSchedule::new(1.0, 0.5, 0.0, 0).is_err());
    }

    #[test]
    fn plume_is_nondecreasing() {
        let s = DisturbanceSchedule::new(1.0, 0.9, 0.0, 40).unwrap();
        let mut prev = 0.0;
        for steps in 0..60 {
            let v = s.plume_variance(steps);
            assert!(v >= prev);
            prev = v;
        }
    }
}
