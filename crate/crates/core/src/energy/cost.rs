use nalgebra::DMatrix;

use super::{
    build_dynamic_forecast_with, build_no_forecast_with, ClosedFormMoments, EnergyParams, MomentMethod, SystemBundle,
};
use crate::error::{Error, Result};
use crate::lqg::{riccati_solve, RiccatiSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// `tr(K M) + alpha/(1-alpha) tr(K Sigma)`.
pub fn trace_form_cost(bundle: &SystemBundle, sol: &RiccatiSolution) -> f64 {
    sol.expected_value(&bundle.initial_second_moment)
}

pub fn solve_bundle(bundle: &SystemBundle) -> Result<RiccatiSolution> {
    riccati_solve(&bundle.lqr, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Expanded expected cost of the no-forecast system.
pub fn no_forecast_cost_expansion(p: &EnergyParams, k: &DMatrix<f64>) -> Result<f64> {
    let vz = p.var_z()?;
    let var_w = vz / (1.0 - p.g * p.g);
    let var_x = var_w + p.sigma2_v / (1.0 - p.rho * p.rho);
    let y2 = (p.tau - p.tau0()).powi(2);
    let noise = k[(0, 0)] * vz + 2.0 * k[(0, 1)] * vz + k[(1, 1)] * (vz + p.sigma2_v);
    Ok(k[(0, 0)] * var_w
        + 2.0 * k[(0, 1)] * var_w
        + k[(1, 1)] * var_x
        + k[(2, 2)] * y2
        + p.alpha / (1.0 - p.alpha) * noise)
}

/// Entrywise expected cost of the forecast system.
pub fn forecast_cost_expansion(p: &EnergyParams, k: &DMatrix<f64>, m: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let mut initial = 0.0;
    let mut noise = 0.0;
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            initial += k[(i, j)] * m[(i, j)];
            noise += k[(i, j)] * c[(i, j)];
        }
    }
    initial + p.alpha / (1.0 - p.alpha) * noise
}

pub fn expected_cost_no_forecast(p: &EnergyParams) -> Result<f64> {
    let bundle = build_no_forecast_with(p, &ClosedFormMoments)?;
    let sol = solve_bundle(&bundle)?;
    no_forecast_cost_expansion(p, &sol.k_matrix)
}

pub fn expected_cost_forecast(p: &EnergyParams) -> Result<f64> {
    let bundle = build_dynamic_forecast_with(p, &ClosedFormMoments)?;
    let sol = solve_bundle(&bundle)?;
    Ok(forecast_cost_expansion(p, &sol.k_matrix, &bundle.initial_second_moment, bundle.lqr.noise_cov()))
}

/// Both expected costs, with the moments supplied by `moments`.
pub fn expected_costs_with(p: &EnergyParams, moments: &dyn MomentMethod) -> Result<(f64, f64)> {
    let nf = build_no_forecast_with(p, moments)?;
    let f = build_dynamic_forecast_with(p, moments)?;
    Ok((trace_form_cost(&nf, &solve_bundle(&nf)?), trace_form_cost(&f, &solve_bundle(&f)?)))
}

/// Percentage reduction in cost from dynamic forecasts.
pub fn improvement_from_costs(cost_nf: f64, cost_f: f64) -> Result<f64> {
    if cost_nf == 0.0 {
        return Err(Error::UndefinedMetric("no-forecast cost is zero".into()));
    }
    Ok(100.0 * (cost_nf - cost_f) / cost_nf)
}

pub fn improvement_d(p: &EnergyParams) -> Result<f64> {
    improvement_from_costs(expected_cost_no_forecast(p)?, expected_cost_forecast(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{build_dynamic_forecast, build_no_forecast};

    #[test]
    fn expansions_match_trace_form() {
        for p in [EnergyParams::default(), EnergyParams { tau: 90.0, gamma: 0.6, ..Default::default() }] {
            let b = build_no_forecast(&p).unwrap();
            let s = solve_bundle(&b).unwrap();
            let t = trace_form_cost(&b, &s);
            assert!((expected_cost_no_forecast(&p).unwrap() - t).abs() < 1e-10 * t.max(1.0));
            let b = build_dynamic_forecast(&p).unwrap();
            let s = solve_bundle(&b).unwrap();
            let t = trace_form_cost(&b, &s);
            assert!((expected_cost_forecast(&p).unwrap() - t).abs() < 1e-10 * t.max(1.0));
        }
    }

    #[test]
    fn defaults_show_a_positive_improvement() {
        let d = improvement_d(&EnergyParams::default()).unwrap();
        assert!((d - 9.6705).abs() < 1e-3, "{d}");
    }

    #[test]
    fn no_disturbance_at_setpoint_costs_nothing() {
        let p = EnergyParams { sigma2: 0.0, sigma2_v: 0.0, mean_v: 0.0, tau: 80.0, ..Default::default() };
        assert!(expected_cost_no_forecast(&p).unwrap().abs() < 1e-12);
        assert!(matches!(improvement_d(&p), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn deterministic_weather_gives_no_improvement() {
        let p = EnergyParams { sigma2: 0.0, ..Default::default() };
        assert!(improvement_d(&p).unwrap().abs() < 1e-8);
    }

    #[test]
    fn no_information_collapses_to_no_forecast() {
        let p = EnergyParams { gamma: 0.0, ..Default::default() };
        let a = expected_cost_no_forecast(&p).unwrap();
        let b = expected_cost_forecast(&p).unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}
