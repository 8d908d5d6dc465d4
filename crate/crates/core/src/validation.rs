//! Battery of invariant checks run by the `validate` mode.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;

use crate::dp::{backward_induction, brute_force_policy_enum, tree, TabularMdp};
use crate::energy::{
    build_dynamic_forecast, build_no_forecast, expected_cost_forecast, expected_cost_no_forecast, forecast_noise_cov,
    improvement_d, linspace, solve_bundle, trace_form_cost, ClosedFormMoments, EnergyParams, LyapunovMoments,
    MomentMethod,
};
use crate::error::Result;
use crate::linalg::min_eigenvalue;
use crate::lqg::{
    fixed_point_residual, riccati_solve, DiscountedLqr, FixedPointLyapunov, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::mmfe::{forecast, martingale_difference, sample_epsilon_array, DisturbanceSchedule, MmfeModel};
use crate::rng;
use crate::sim::{simulate_energy_pair, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error category={}: {e}", e.category())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatteryOptions {
    pub seed: u64,
    pub sim_replications: usize,
    pub dp_instances: usize,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self { seed: 2024, sim_replications: 20_000, dp_instances: 20 }
    }
}

fn riccati_residuals(p: &EnergyParams) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [build_no_forecast(p)?, build_dynamic_forecast(p)?] {
        let s = riccati_solve(&b.lqr, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        worst = worst.max(fixed_point_residual(&b.lqr, &s.k_matrix));
    }
    Ok((worst < 1e-12, format!("max residual {worst:e}")))
}

fn monotone_iterates(p: &EnergyParams) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for b in [build_no_forecast(p)?, build_dynamic_forecast(p)?] {
        let mut prev: Option<DMatrix<f64>> = None;
        for k in b.lqr.iterates().take(400) {
            if let Some(pk) = &prev {
                worst = worst.min(min_eigenvalue(&(&k - pk)));
            }
            prev = Some(k);
        }
    }
    Ok((worst >= -1e-10, format!("smallest eigenvalue of K_(j+1) - K_j: {worst:e}")))
}

/// Root of `q + alpha a² k - alpha² a² b² k² / (alpha b² k + r) - k` by bisection.
fn scalar_riccati_bisection(a: f64, b: f64, q: f64, r: f64, alpha: f64) -> f64 {
    let h = |k: f64| q + alpha * a * a * k - alpha * alpha * a * a * b * b * k * k / (alpha * b * b * k + r) - k;
    let (mut lo, mut hi) = (q, q.max(1.0));
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scalar_oracle() -> Result<(bool, String)> {
    let m = |x| DMatrix::from_element(1, 1, x);
    let lqr = DiscountedLqr::new(m(0.9), m(1.0), m(1.0), m(1.0), 0.9, m(1.0))?;
    let k = riccati_solve(&lqr, DEFAULT_TOL, DEFAULT_MAX_ITER)?.k_matrix[(0, 0)];
    let oracle = scalar_riccati_bisection(0.9, 1.0, 1.0, 1.0, 0.9);
    Ok(((k - oracle).abs() < 1e-10, format!("K={k:.15} bisection={oracle:.15}")))
}

fn moments_agree(p: &EnergyParams) -> Result<(bool, String)> {
    let lyap = LyapunovMoments(Arc::new(FixedPointLyapunov::default()));
    let c = forecast_noise_cov(p)?;
    let d1 = (ClosedFormMoments.forecast(p, &c)? - lyap.forecast(p, &c)?).amax();
    let d2 = (ClosedFormMoments.no_forecast(p)? - lyap.no_forecast(p)?).amax();
    let d = d1.max(d2);
    Ok((d < 1e-10, format!("max |closed form - Lyapunov| = {d:e}")))
}

fn x_column_tie(p: &EnergyParams) -> Result<(bool, String)> {
    let m = build_dynamic_forecast(p)?.initial_second_moment;
    let ok = (0..3).all(|i| m[(i, 3)] == m[(i, 0)]);
    Ok((ok, "E chi(i)chi(4) = E chi(i)chi(1), i=1..3".into()))
}

fn trace_forms(p: &EnergyParams) -> Result<(bool, String)> {
    let nf = build_no_forecast(p)?;
    let f = build_dynamic_forecast(p)?;
    let t_nf = trace_form_cost(&nf, &solve_bundle(&nf)?);
    let t_f = trace_form_cost(&f, &solve_bundle(&f)?);
    let d1 = (expected_cost_no_forecast(p)? - t_nf).abs();
    let d2 = (expected_cost_forecast(p)? - t_f).abs();
    Ok((d1.max(d2) < 1e-10 * t_nf.max(1.0), format!("differences {d1:e}, {d2:e}")))
}

fn action_expansion(p: &EnergyParams) -> Result<(bool, String)> {
    let sol = solve_bundle(&build_no_forecast(p)?)?;
    let k = &sol.k_matrix;
    let s = p.alpha / (p.alpha * k[(1, 1)] + p.kappa);
    let expect = [s * (p.g * k[(1, 0)] + (p.g - p.rho) * k[(1, 1)]), s * p.rho * k[(1, 1)], s * k[(1, 2)]];
    let d = (0..3).map(|j| (sol.gain[(0, j)] - expect[j]).abs()).fold(0.0, f64::max);
    Ok((d < 1e-10, format!("max gain deviation {d:e}")))
}

fn information_collapse(p: &EnergyParams) -> Result<(bool, String)> {
    let q = EnergyParams { gamma: 0.0, ..*p };
    let d = (expected_cost_no_forecast(&q)? - expected_cost_forecast(&q)?).abs();
    Ok((d < 1e-6, format!("|cost_nf - cost_f| at gamma=0: {d:e}")))
}

fn deterministic_weather(p: &EnergyParams) -> Result<(bool, String)> {
    let d = improvement_d(&EnergyParams { sigma2: 0.0, ..*p })?;
    Ok((d.abs() < 1e-8, format!("D at sigma2=0: {d:e}")))
}

fn setpoint_symmetry(p: &EnergyParams) -> Result<(bool, String)> {
    let t0 = p.tau0();
    let mut worst: f64 = 0.0;
    for delta in [0.5, 3.0, 8.0] {
        let a = improvement_d(&EnergyParams { tau: t0 + delta, ..*p })?;
        let b = improvement_d(&EnergyParams { tau: t0 - delta, ..*p })?;
        worst = worst.max((a - b).abs());
    }
    Ok((worst < 1e-8, format!("max |D(tau0+d) - D(tau0-d)| = {worst:e}")))
}

fn nonnegative_d(p: &EnergyParams) -> Result<(bool, String)> {
    let mut min = f64::INFINITY;
    for gamma in linspace(0.5, 0.99, 9) {
        for g in linspace(0.35, 0.95, 9) {
            min = min.min(improvement_d(&EnergyParams { gamma, g, ..*p })?);
        }
    }
    Ok((min >= -1e-8, format!("min D on a 9x9 grid: {min:e}")))
}

fn mmfe_identities(seed: u64) -> Result<(bool, String)> {
    let m = MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.8, 32.0, 20)?)?;
    let eps = sample_epsilon_array(&m, -40..=30, seed)?;
    let w = DVector::from_element(1, 80.3);
    let mut worst: f64 = 0.0;
    let k0 = 0;
    for n in 1..=12 {
        // F_{n|n} = W_n along the path generated from W_0.
        let w_n = crate::mmfe::realized_weather(&m, &eps, &w, k0, n)?;
        let f_nn = forecast(&m, &eps, &w_n, n, n)?;
        worst = worst.max((f_nn - &w_n).amax());
        // Telescoping: F_{n|k} = F_{n|0} + sum_{i=1}^{k} D_{n|i}.
        for k in 1..=n {
            let w_k = crate::mmfe::realized_weather(&m, &eps, &w, k0, k)?;
            let mut tele = forecast(&m, &eps, &w, k0, n)?;
            for i in 1..=k {
                tele += martingale_difference(&m, &eps, n, i)?;
            }
            worst = worst.max((forecast(&m, &eps, &w_k, k, n)? - tele).amax() / 80.0);
        }
    }
    Ok((worst < 1e-12, format!("max relative deviation {worst:e}")))
}

fn random_mdp(rng: &mut rand_chacha::ChaCha8Rng) -> Result<TabularMdp> {
    use rand::Rng;
    let ns = rng.random_range(2..=3);
    let na = 2;
    let stages = rng.random_range(1..=3);
    let costs =
        (0..stages).map(|_| (0..ns).map(|_| (0..na).map(|_| rng.random::<f64>()).collect()).collect()).collect();
    let kernels = (0..stages - 1)
        .map(|_| {
            (0..ns)
                .map(|_| {
                    (0..na)
                        .map(|_| {
                            let raw: Vec<f64> = (0..ns).map(|_| rng.random::<f64>()).collect();
                            let s: f64 = raw.iter().sum();
                            let mut p: Vec<f64> = raw.iter().map(|x| x / s).collect();
                            let head: f64 = p[..ns - 1].iter().sum();
                            p[ns - 1] = 1.0 - head;
                            p
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    TabularMdp::from_dense(na, costs, kernels)
}

fn dp_enumeration(seed: u64, count: usize) -> Result<(bool, String)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng::mix(seed, &[11]));
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mdp = random_mdp(&mut rng)?;
        let a = backward_induction(&mdp);
        let b = brute_force_policy_enum(&mdp)?;
        for (x, y) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok((worst < 1e-12, format!("{count} instances, max difference {worst:e}")))
}

fn dp_information(seed: u64, count: usize) -> Result<(bool, String)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng::mix(seed, &[12]));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let c = tree::compare_information(&tree::TreeInstance::random(&mut rng))?;
        worst = worst.max((c.cost_forecast - c.cost_no_forecast) / (1.0 + c.cost_no_forecast.abs()));
    }
    Ok((worst <= 1e-12, format!("{count} trees, max relative (cost_f - cost_nf) {worst:e}")))
}

fn simulation(p: &EnergyParams, seed: u64, reps: usize) -> Result<(bool, String)> {
    let est = simulate_energy_pair(p, &SimConfig::new(p.alpha, reps, seed))?;
    let z1 = est.no_forecast.z_score(expected_cost_no_forecast(p)?);
    let z2 = est.forecast.z_score(expected_cost_forecast(p)?);
    Ok((z1.abs() < 3.0 && z2.abs() < 3.0, format!("z no-forecast {z1:.3}, z forecast {z2:.3}")))
}

/// Runs every check; none of them stops the others.
pub fn run_battery(p: &EnergyParams, opts: &BatteryOptions) -> Vec<Check> {
    vec![
        Check::from("riccati_fixed_point_residual", riccati_residuals(p)),
        Check::from("riccati_scalar_bisection_oracle", scalar_oracle()),
        Check::from("riccati_monotone_iterates", monotone_iterates(p)),
        Check::from("moments_closed_form_vs_lyapunov", moments_agree(p)),
        Check::from("moments_x_column_tie", x_column_tie(p)),
        Check::from("cost_expansion_vs_trace_form", trace_forms(p)),
        Check::from("optimal_action_expansion", action_expansion(p)),
        Check::from("gamma_zero_information_collapse", information_collapse(p)),
        Check::from("deterministic_weather_no_gain", deterministic_weather(p)),
        Check::from("setpoint_symmetry", setpoint_symmetry(p)),
        Check::from("improvement_nonnegative", nonnegative_d(p)),
        Check::from("mmfe_forecast_identities", mmfe_identities(opts.seed)),
        Check::from("dp_backward_vs_enumeration", dp_enumeration(opts.seed, opts.dp_instances)),
        Check::from("dp_information_monotonicity", dp_information(opts.seed, opts.dp_instances)),
        Check::from("simulation_vs_closed_form", simulation(p, opts.seed, opts.sim_replications)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_oracle_solves_its_equation() {
        let k = scalar_riccati_bisection(0.9, 1.0, 1.0, 1.0, 0.9);
        let rhs = 1.0 + 0.9 * 0.81 * k - 0.81 * 0.81 * k * k / (0.9 * k + 1.0);
        assert!((rhs - k).abs() < 1e-12);
    }

    #[test]
    fn battery_passes_at_defaults() {
        let opts = BatteryOptions { sim_replications: 2000, dp_instances: 5, ..Default::default() };
        for c in run_battery(&EnergyParams::default(), &opts) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
