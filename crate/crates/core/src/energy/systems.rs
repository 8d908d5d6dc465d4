use std::sync::Arc;

use nalgebra::DMatrix;

use super::EnergyParams;
use crate::error::Result;
use crate::lqg::{DiscountedLqr, LyapunovSolver};

pub const NO_FORECAST_LABELS: [&str; 3] = ["W~", "X~", "Y"];
pub const FORECAST_LABELS: [&str; 5] = ["W~", "F~1", "F~2", "X~", "Y"];

/// An LQ system together with the second moment of its initial state.
#[derive(Debug, Clone)]
pub struct SystemBundle {
    pub lqr: DiscountedLqr,
    pub initial_second_moment: DMatrix<f64>,
    pub labels: Vec<&'static str>,
}

/// How the initial second moment is obtained.
pub trait MomentMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn no_forecast(&self, p: &EnergyParams) -> Result<DMatrix<f64>>;
    fn forecast(&self, p: &EnergyParams, c: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

fn setpoint_gap2(p: &EnergyParams) -> f64 {
    (p.tau - p.tau0()).powi(2)
}

/// Printed closed forms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClosedFormMoments;

impl MomentMethod for ClosedFormMoments {
    fn name(&self) -> &'static str {
        "closed-form"
    }

    fn no_forecast(&self, p: &EnergyParams) -> Result<DMatrix<f64>> {
        let var_w = p.var_z()? / (1.0 - p.g * p.g);
        let var_x = var_w + p.sigma2_v / (1.0 - p.rho * p.rho);
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = var_w;
        m[(0, 1)] = var_w;
        m[(1, 0)] = var_w;
        m[(1, 1)] = var_x;
        m[(2, 2)] = setpoint_gap2(p);
        Ok(m)
    }

    fn forecast(&self, p: &EnergyParams, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let g = p.g;
        let s = 1.0 / (1.0 - g * g);
        let var_w = p.var_z()? * s;
        let m33 = c[(2, 2)] * s;
        let m22 = m33 + c[(1, 1)];
        let m23 = g * c[(2, 2)] * s + c[(1, 2)];
        let m12 = g * c[(2, 2)] * s + c[(1, 2)] + c[(0, 1)];
        // The printed form drops the factor g on C(2,3); the stationarity
        // identity requires it.
        let m13 = g * g * c[(2, 2)] * s + g * c[(1, 2)] + c[(0, 2)];
        let m44 = var_w + p.sigma2_v / (1.0 - p.rho * p.rho);
        let mut m = DMatrix::zeros(5, 5);
        let upper = [
            (0, 0, var_w),
            (0, 1, m12),
            (0, 2, m13),
            (1, 1, m22),
            (1, 2, m23),
            (2, 2, m33),
            (0, 3, var_w),
            (1, 3, m12),
            (2, 3, m13),
            (3, 3, m44),
            (4, 4, setpoint_gap2(p)),
        ];
        for (i, j, v) in upper {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(m)
    }
}

/// Stationary covariance of the uncontrolled stochastic block, with the
/// constant coordinate appended.
#[derive(Clone)]
pub struct LyapunovMoments(pub Arc<dyn LyapunovSolver>);

impl LyapunovMoments {
    fn with_constant(&self, a: &DMatrix<f64>, noise: &DMatrix<f64>, y2: f64) -> Result<DMatrix<f64>> {
        let k = a.nrows();
        let block = self.0.solve(a, noise)?;
        let mut m = DMatrix::zeros(k + 1, k + 1);
        m.view_mut((0, 0), (k, k)).copy_from(&block);
        m[(k, k)] = y2;
        Ok(m)
    }
}

impl MomentMethod for LyapunovMoments {
    fn name(&self) -> &'static str {
        "lyapunov"
    }

    fn no_forecast(&self, p: &EnergyParams) -> Result<DMatrix<f64>> {
        let a = uncontrolled_no_forecast(p);
        let s = no_forecast_noise_cov(p)?;
        self.with_constant(&a.view((0, 0), (2, 2)).into(), &s.view((0, 0), (2, 2)).into(), setpoint_gap2(p))
    }

    fn forecast(&self, p: &EnergyParams, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let a = forecast_dynamics(p);
        self.with_constant(&a.view((0, 0), (4, 4)).into(), &c.view((0, 0), (4, 4)).into(), setpoint_gap2(p))
    }
}

fn uncontrolled_no_forecast(p: &EnergyParams) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[p.g, 0.0, 0.0, p.g - p.rho, p.rho, 0.0, 0.0, 0.0, 1.0])
}

fn forecast_dynamics(p: &EnergyParams) -> DMatrix<f64> {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, p.g, 0.0, 0.0,
        -p.rho, 1.0, 0.0, p.rho, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0,
    ]);
    a
}

/// Setpoint-tracking cost `(X~ - Y)²` on the given coordinates.
fn tracking_cost(dim: usize, x: usize, y: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(dim, dim);
    q[(x, x)] = 1.0;
    q[(y, y)] = 1.0;
    q[(x, y)] = -1.0;
    q[(y, x)] = -1.0;
    q
}

/// Covariance of `(Z~, Z~ + V~, 0)`.
pub fn no_forecast_noise_cov(p: &EnergyParams) -> Result<DMatrix<f64>> {
    let vz = p.var_z()?;
    Ok(DMatrix::from_row_slice(3, 3, &[vz, vz, 0.0, vz, vz + p.sigma2_v, 0.0, 0.0, 0.0, 0.0]))
}

/// Covariance `C` of the forecast-system noise with `r = 2`.
pub fn forecast_noise_cov(p: &EnergyParams) -> Result<DMatrix<f64>> {
    let s = p.schedule()?;
    let g = p.g;
    let e = |j: i64| s.variance(j);
    let (e0, e1, e2) = (e(0), e(1), e(2));
    let tail = s.tail_variance(3);
    let mut c = DMatrix::zeros(5, 5);
    let upper = [
        (0, 0, e0),
        (0, 1, g * e0),
        (0, 2, g * g * e0),
        (0, 3, e0),
        (1, 1, e1 + g * g * e0),
        (1, 2, g * e1 + g.powi(3) * e0),
        (1, 3, g * e0),
        (2, 2, e2 + g * g * e1 + g.powi(4) * e0 + tail),
        (2, 3, g * g * e0),
        (3, 3, e0 + p.sigma2_v),
    ];
    for (i, j, v) in upper {
        c[(i, j)] = v;
        c[(j, i)] = v;
    }
    Ok(c)
}

pub fn build_no_forecast_with(p: &EnergyParams, moments: &dyn MomentMethod) -> Result<SystemBundle> {
    p.validate()?;
    let lqr = DiscountedLqr::new(
        uncontrolled_no_forecast(p),
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
        tracking_cost(3, 1, 2),
        DMatrix::from_element(1, 1, p.kappa),
        p.alpha,
        no_forecast_noise_cov(p)?,
    )?;
    Ok(SystemBundle { lqr, initial_second_moment: moments.no_forecast(p)?, labels: NO_FORECAST_LABELS.to_vec() })
}

pub fn build_dynamic_forecast_with(p: &EnergyParams, moments: &dyn MomentMethod) -> Result<SystemBundle> {
    p.validate()?;
    let c = forecast_noise_cov(p)?;
    let m = moments.forecast(p, &c)?;
    let lqr = DiscountedLqr::new(
        forecast_dynamics(p),
        DMatrix::from_column_slice(5, 1, &[0.0, 0.0, 0.0, 1.0, 0.0]),
        tracking_cost(5, 3, 4),
        DMatrix::from_element(1, 1, p.kappa),
        p.alpha,
        c,
    )?;
    Ok(SystemBundle { lqr, initial_second_moment: m, labels: FORECAST_LABELS.to_vec() })
}

pub fn build_no_forecast(p: &EnergyParams) -> Result<SystemBundle> {
    build_no_forecast_with(p, &ClosedFormMoments)
}

pub fn build_dynamic_forecast(p: &EnergyParams) -> Result<SystemBundle> {
    build_dynamic_forecast_with(p, &ClosedFormMoments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqg::FixedPointLyapunov;

    #[test]
    fn c_entries_at_defaults() {
        let p = EnergyParams::default();
        let c = forecast_noise_cov(&p).unwrap();
        assert!((c[(0, 1)] - 0.6).abs() < 1e-15);
        assert!((c[(1, 1)] - (0.95f64.powi(2) + 0.36)).abs() < 1e-15);
        let l = p.trunc_lag() as i32;
        let tail: f64 = (3..=l).map(|j| 0.95f64.powi(2 * j)).sum();
        let c33 = 0.95f64.powi(4) + 0.95f64.powi(2) * 0.36 + 0.6f64.powi(4) + tail;
        assert!((c[(2, 2)] - c33).abs() < 1e-12);
    }

    #[test]
    fn gamma_zero_degenerates() {
        let p = EnergyParams { gamma: 0.0, ..Default::default() };
        let c = forecast_noise_cov(&p).unwrap();
        assert!((c[(1, 1)] - 0.36).abs() < 1e-15);
        assert!((c[(2, 2)] - 0.6f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_moments_match_lyapunov() {
        let lyap = LyapunovMoments(Arc::new(FixedPointLyapunov::default()));
        for p in [
            EnergyParams::default(),
            EnergyParams { g: 0.9, rho: 0.5, gamma: 0.7, sigma2_v: 2.0, ..Default::default() },
            EnergyParams { gamma: 0.0, ..Default::default() },
        ] {
            let a = ClosedFormMoments.forecast(&p, &forecast_noise_cov(&p).unwrap()).unwrap();
            let b = lyap.forecast(&p, &forecast_noise_cov(&p).unwrap()).unwrap();
            assert!((&a - &b).amax() < 1e-10, "{}", (&a - &b).amax());
            let a = ClosedFormMoments.no_forecast(&p).unwrap();
            let b = lyap.no_forecast(&p).unwrap();
            assert!((&a - &b).amax() < 1e-10);
        }
    }

    #[test]
    fn x_column_is_tied_to_w_column() {
        let p = EnergyParams::default();
        let m = ClosedFormMoments.forecast(&p, &forecast_noise_cov(&p).unwrap()).unwrap();
        for i in 0..3 {
            assert_eq!(m[(i, 3)], m[(i, 0)]);
        }
    }
}
