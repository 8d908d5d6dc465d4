use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmfe::DisturbanceSchedule;

/// Parameters of the building-temperature example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Outdoor AR(1) coefficient.
    pub g: f64,
    /// Indoor mean reversion.
    pub rho: f64,
    /// Control penalty.
    pub kappa: f64,
    pub alpha: f64,
    /// Setpoint (°F).
    pub tau: f64,
    /// Stationary outdoor mean `E W_0` (°F).
    pub mean_w: f64,
    /// `E V_0` (°F).
    pub mean_v: f64,
    pub sigma2: f64,
    pub sigma2_v: f64,
    pub gamma: f64,
    /// Forecast truncation lag; derived from `gamma` when absent.
    pub trunc_lag: Option<usize>,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            g: 0.6,
            rho: 0.3,
            kappa: 1.0,
            alpha: 0.9,
            tau: 74.0,
            mean_w: 80.0,
            mean_v: 2.0,
            sigma2: 1.0,
            sigma2_v: 1.0,
            gamma: 0.95,
            trunc_lag: None,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let all = [
            self.g,
            self.rho,
            self.kappa,
            self.alpha,
            self.tau,
            self.mean_w,
            self.mean_v,
            self.sigma2,
            self.sigma2_v,
            self.gamma,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if !(0.0 < self.rho && self.rho < self.g && self.g < 1.0) {
            return bad(format!("need 0 < rho < g < 1, got rho={} g={}", self.rho, self.g));
        }
        if self.kappa <= 0.0 {
            return bad(format!("kappa={} must be positive", self.kappa));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha={} outside (0, 1)", self.alpha));
        }
        // gamma = 0 is the no-information limit and is accepted.
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma={} outside [0, 1)", self.gamma));
        }
        if self.sigma2 < 0.0 || self.sigma2_v < 0.0 {
            return bad("variances must be nonnegative".into());
        }
        if self.trunc_lag == Some(0) {
            return bad("trunc_lag must be at least 1".into());
        }
        Ok(())
    }

    /// `E Z_0 = (1 - g) E W_0`.
    pub fn mean_z(&self) -> f64 {
        (1.0 - self.g) * self.mean_w
    }

    /// Uncontrolled equilibrium temperature.
    pub fn tau0(&self) -> f64 {
        self.mean_w + self.mean_v / (1.0 - self.rho)
    }

    pub fn trunc_lag(&self) -> usize {
        self.trunc_lag.unwrap_or_else(|| DisturbanceSchedule::default_trunc_lag(self.gamma))
    }

    pub fn schedule(&self) -> Result<DisturbanceSchedule> {
        DisturbanceSchedule::new(self.sigma2, self.gamma, self.mean_z(), self.trunc_lag())
    }

    /// Truncated `var Z_0`, shared by both formulations.
    pub fn var_z(&self) -> Result<f64> {
        Ok(self.schedule()?.innovation_variance())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults() {
        let p = EnergyParams::default();
        p.validate().unwrap();
        assert!((p.tau0() - (80.0 + 2.0 / 0.7)).abs() < 1e-12);
        assert!((p.mean_z() - 32.0).abs() < 1e-12);
        assert_eq!(p.trunc_lag(), 270);
    }

    #[test]
    fn rho_must_stay_below_g() {
        let p = EnergyParams { rho: 0.6, ..Default::default() };
        assert!(p.validate().is_err());
        let p = EnergyParams { kappa: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn var_z_is_truncated_geometric_sum() {
        let p = EnergyParams::default();
        let l = p.trunc_lag() as i32;
        let expect = (1.0 - 0.95f64.powi(2 * (l + 1))) / (1.0 - 0.95f64.powi(2));
        assert!((p.var_z().unwrap() - expect).abs() < 1e-12);
    }
}
