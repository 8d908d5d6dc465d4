use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::lqr::DivergenceDetector;
use super::{CostEstimate, SimConfig};
use crate::energy::{build_dynamic_forecast, build_no_forecast, solve_bundle, EnergyParams};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::mmfe::roll_scalar_in_place;
use crate::rng::{self, TAG_REPLICATION};

/// Monte Carlo costs of both controllers on common weather and building
/// noise, with the weather and its forecasts generated by the forecast roll.
#[derive(Debug, Clone, Copy)]
pub struct PairedEstimate {
    pub no_forecast: CostEstimate,
    pub forecast: CostEstimate,
    /// Per-replication `cost_nf - cost_f`.
    pub difference: CostEstimate,
}

/// Simulates both controllers with the given gains (`1x3` and `1x5`).
pub fn simulate_energy_pair_with(
    p: &EnergyParams,
    gain_nf: &DMatrix<f64>,
    gain_f: &DMatrix<f64>,
    cfg: &SimConfig,
) -> Result<PairedEstimate> {
    cfg.validate()?;
    if gain_nf.shape() != (1, 3) || gain_f.shape() != (1, 5) {
        return Err(Error::Shape("gains must be 1x3 and 1x5".into()));
    }
    let f = build_dynamic_forecast(p)?;
    let block = f.initial_second_moment.view((0, 0), (4, 4)).into_owned();
    let init = psd_factor(&block)?;
    let sched = p.schedule()?;
    let sd = [sched.std_dev(0), sched.std_dev(1), sched.std_dev(2)];
    let sd_agg = sched.tail_variance(3).sqrt();
    let sd_v = p.sigma2_v.sqrt();
    let (g, rho, kappa, alpha) = (p.g, p.rho, p.kappa, cfg.discount);
    let y = p.tau - p.tau0();
    let kn: Vec<f64> = gain_nf.iter().copied().collect();
    let kf: Vec<f64> = gain_f.iter().copied().collect();

    let run = |rep: usize| -> Result<(f64, f64, f64)> {
        let mut rng = rng::stream(cfg.seed, &[TAG_REPLICATION, rep as u64]);
        let n = |rng: &mut rand_chacha::ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
        let zs = nalgebra::DVector::from_fn(4, |_, _| n(&mut rng));
        let x0 = &init * zs;
        // Centred weather, forecasts and indoor deviation.
        let mut w = x0[0];
        let mut fc = [x0[1], x0[2]];
        let (mut x_nf, mut x_f) = (x0[3], x0[3]);
        let (mut tot_nf, mut tot_f, mut disc, mut c_max) = (0.0, 0.0, 1.0, 0.0f64);
        let mut det_nf = DivergenceDetector::new(cfg.horizon_periods);
        let mut det_f = DivergenceDetector::new(cfg.horizon_periods);
        for _ in 0..cfg.horizon_periods {
            let a_nf = -(kn[0] * w + kn[1] * x_nf + kn[2] * y);
            let a_f = -(kf[0] * w + kf[1] * fc[0] + kf[2] * fc[1] + kf[3] * x_f + kf[4] * y);
            let c_nf = (x_nf - y).powi(2) + kappa * a_nf * a_nf;
            let c_f = (x_f - y).powi(2) + kappa * a_f * a_f;
            det_nf.push(c_nf)?;
            det_f.push(c_f)?;
            c_max = c_max.max(c_nf).max(c_f);
            tot_nf += disc * c_nf;
            tot_f += disc * c_f;
            disc *= alpha;
            let reveals = [sd[0] * n(&mut rng), sd[1] * n(&mut rng), sd[2] * n(&mut rng)];
            let agg = sd_agg * n(&mut rng);
            let v = sd_v * n(&mut rng);
            let w_next = roll_scalar_in_place(g, 0.0, &mut fc, &reveals, agg);
            // X' = rho X + (W' - rho W) + a + V in both systems.
            x_nf = rho * x_nf + w_next - rho * w + a_nf + v;
            x_f = rho * x_f + w_next - rho * w + a_f + v;
            w = w_next;
        }
        Ok((tot_nf, tot_f, c_max))
    };
    let runs = (0..cfg.replications).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let c_max = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let bias = alpha.powi(cfg.horizon_periods as i32) * c_max / (1.0 - alpha);
    let nf: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let fv: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = runs.iter().map(|r| r.0 - r.1).collect();
    Ok(PairedEstimate {
        no_forecast: CostEstimate::from_samples(&nf, bias),
        forecast: CostEstimate::from_samples(&fv, bias),
        difference: CostEstimate::from_samples(&diff, 2.0 * bias),
    })
}

/// Paired simulation under the optimal gains of both systems.
pub fn simulate_energy_pair(p: &EnergyParams, cfg: &SimConfig) -> Result<PairedEstimate> {
    let nf = solve_bundle(&build_no_forecast(p)?)?;
    let f = solve_bundle(&build_dynamic_forecast(p)?)?;
    simulate_energy_pair_with(p, &nf.gain, &f.gain, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{expected_cost_forecast, expected_cost_no_forecast};

    #[test]
    fn small_run_is_consistent_with_closed_forms() {
        let p = EnergyParams { gamma: 0.8, ..Default::default() };
        let cfg = SimConfig::new(p.alpha, 4000, 17);
        let est = simulate_energy_pair(&p, &cfg).unwrap();
        assert!(est.no_forecast.z_score(expected_cost_no_forecast(&p).unwrap()).abs() < 4.0);
        assert!(est.forecast.z_score(expected_cost_forecast(&p).unwrap()).abs() < 4.0);
        assert!(est.difference.mean > 0.0);
    }
}
