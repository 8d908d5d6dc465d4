use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{CostEstimate, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::lqg::DiscountedLqr;
use crate::rng::{self, TAG_REPLICATION};

/// Source of initial states and additive noise for a linear system.
pub trait Scenario: Sync {
    fn lqr(&self) -> &DiscountedLqr;
    fn initial_state(&self, rng: &mut dyn rand::RngCore) -> DVector<f64>;
    /// Writes the noise of one period into `out`.
    fn noise(&self, rng: &mut dyn rand::RngCore, out: &mut DVector<f64>);
}

/// Gaussian initial state and i.i.d. Gaussian noise with the system's
/// covariance.
pub struct GaussianScenario {
    lqr: DiscountedLqr,
    init_mean: DVector<f64>,
    init_factor: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

impl GaussianScenario {
    pub fn new(lqr: DiscountedLqr, init_mean: DVector<f64>, init_cov: &DMatrix<f64>) -> Result<Self> {
        let m = lqr.state_dim();
        if init_mean.len() != m || init_cov.shape() != (m, m) {
            return Err(Error::Shape("initial distribution does not match the system".into()));
        }
        let init_factor = psd_factor(init_cov)?;
        let noise_factor = psd_factor(lqr.noise_cov())?;
        Ok(Self { lqr, init_mean, init_factor, noise_factor })
    }

    /// Takes the initial law from a second moment whose `constant`
    /// coordinate is deterministic: that coordinate is fixed at
    /// `constant_value` and the rest is centred Gaussian.
    pub fn with_constant(
        lqr: DiscountedLqr,
        second_moment: &DMatrix<f64>,
        constant: usize,
        constant_value: f64,
    ) -> Result<Self> {
        let m = second_moment.nrows();
        let mut mean = DVector::zeros(m);
        mean[constant] = constant_value;
        let mut cov = second_moment.clone();
        cov.row_mut(constant).fill(0.0);
        cov.column_mut(constant).fill(0.0);
        Self::new(lqr, mean, &cov)
    }
}

fn standard_normal_vec(rng: &mut dyn rand::RngCore, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

impl Scenario for GaussianScenario {
    fn lqr(&self) -> &DiscountedLqr {
        &self.lqr
    }

    fn initial_state(&self, rng: &mut dyn rand::RngCore) -> DVector<f64> {
        &self.init_mean + &self.init_factor * standard_normal_vec(rng, self.init_mean.len())
    }

    fn noise(&self, rng: &mut dyn rand::RngCore, out: &mut DVector<f64>) {
        let z = standard_normal_vec(rng, out.len());
        self.noise_factor.mul_to(&z, out);
    }
}

/// Flags runaway trajectories: block means of the stage cost that keep
/// growing tenfold.
pub(crate) struct DivergenceDetector {
    block: usize,
    sum: f64,
    count: usize,
    prev: Option<f64>,
    streak: usize,
}

impl DivergenceDetector {
    pub(crate) fn new(horizon: usize) -> Self {
        Self { block: (horizon / 8).max(5), sum: 0.0, count: 0, prev: None, streak: 0 }
    }

    pub(crate) fn push(&mut self, stage_cost: f64) -> Result<()> {
        if !stage_cost.is_finite() {
            return Err(Error::Divergence("non-finite stage cost".into()));
        }
        self.sum += stage_cost;
        self.count += 1;
        if self.count == self.block {
            let mean = self.sum / self.block as f64;
            if let Some(prev) = self.prev {
                if prev > 0.0 && mean > 10.0 * prev {
                    self.streak += 1;
                    if self.streak >= 2 {
                        return Err(Error::Divergence(format!("stage-cost block mean grew from {prev:e} to {mean:e}")));
                    }
                } else {
                    self.streak = 0;
                }
            }
            self.prev = Some(mean);
            self.sum = 0.0;
            self.count = 0;
        }
        Ok(())
    }
}

/// Discounted cost of one trajectory under `a = -gain z`, plus the largest
/// stage cost seen.
fn replicate<S: Scenario + ?Sized>(
    scenario: &S,
    gain: &DMatrix<f64>,
    cfg: &SimConfig,
    rep: usize,
) -> Result<(f64, f64)> {
    let lqr = scenario.lqr();
    let mut rng = rng::stream(cfg.seed, &[TAG_REPLICATION, rep as u64]);
    let mut z = scenario.initial_state(&mut rng);
    let m = z.len();
    let mut a = DVector::zeros(gain.nrows());
    let mut next = DVector::zeros(m);
    let mut xi = DVector::zeros(m);
    let mut qz = DVector::zeros(m);
    let mut ra = DVector::zeros(a.len());
    let mut total = 0.0;
    let mut disc = 1.0;
    let mut c_max: f64 = 0.0;
    let mut detector = DivergenceDetector::new(cfg.horizon_periods);
    for _ in 0..cfg.horizon_periods {
        gain.mul_to(&z, &mut a);
        a.neg_mut();
        lqr.q_matrix().mul_to(&z, &mut qz);
        lqr.r_matrix().mul_to(&a, &mut ra);
        let stage = z.dot(&qz) + a.dot(&ra);
        detector.push(stage)?;
        c_max = c_max.max(stage);
        total += disc * stage;
        disc *= cfg.discount;
        scenario.noise(&mut rng, &mut xi);
        lqr.a_matrix().mul_to(&z, &mut next);
        next.gemv(1.0, lqr.b_matrix(), &a, 1.0);
        next += &xi;
        std::mem::swap(&mut z, &mut next);
    }
    Ok((total, c_max))
}

/// Per-replication discounted costs of the linear policy `a = -gain z`,
/// with the truncation bias bound. Replication `i` draws from its own
/// stream, so two gains evaluated with the same seed see the same noise.
pub fn simulate_cost_samples<S: Scenario + ?Sized>(
    scenario: &S,
    gain: &DMatrix<f64>,
    cfg: &SimConfig,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let lqr = scenario.lqr();
    if gain.shape() != (lqr.control_dim(), lqr.state_dim()) {
        return Err(Error::Shape(format!("gain is {:?}", gain.shape())));
    }
    let runs = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| replicate(scenario, gain, cfg, rep))
        .collect::<Result<Vec<_>>>()?;
    let c_max = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let bias = cfg.discount.powi(cfg.horizon_periods as i32) * c_max / (1.0 - cfg.discount);
    Ok((runs.into_iter().map(|r| r.0).collect(), bias))
}

/// Monte Carlo estimate of the discounted cost of the linear policy
/// `a = -gain z`. The result does not depend on thread scheduling.
pub fn simulate_discounted_cost<S: Scenario + ?Sized>(
    scenario: &S,
    gain: &DMatrix<f64>,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    let (totals, bias) = simulate_cost_samples(scenario, gain, cfg)?;
    Ok(CostEstimate::from_samples(&totals, bias))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_lqr(a: f64, q: f64, s: f64) -> DiscountedLqr {
        let m = |x| DMatrix::from_element(1, 1, x);
        DiscountedLqr::new(m(a), m(1.0), m(q), m(1.0), 0.9, m(s)).unwrap()
    }

    #[test]
    fn noiseless_zero_start_costs_nothing() {
        let sc = GaussianScenario::new(scalar_lqr(0.5, 3.0, 0.0), DVector::zeros(1), &DMatrix::zeros(1, 1)).unwrap();
        let est = simulate_discounted_cost(&sc, &DMatrix::zeros(1, 1), &SimConfig::new(0.9, 10, 1)).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn reproducible() {
        let sc = GaussianScenario::new(scalar_lqr(0.5, 1.0, 1.0), DVector::zeros(1), &DMatrix::identity(1, 1)).unwrap();
        let gain = DMatrix::from_element(1, 1, 0.2);
        let a = simulate_discounted_cost(&sc, &gain, &SimConfig::new(0.9, 200, 9)).unwrap();
        let b = simulate_discounted_cost(&sc, &gain, &SimConfig::new(0.9, 200, 9)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn runaway_closed_loop_is_reported() {
        let m = |x| DMatrix::from_element(1, 1, x);
        let lqr = DiscountedLqr::new(m(3.0), m(1.0), m(1.0), m(1.0), 0.9, m(1.0)).unwrap();
        let sc = GaussianScenario::new(lqr, DVector::zeros(1), &DMatrix::identity(1, 1)).unwrap();
        let r = simulate_discounted_cost(&sc, &DMatrix::zeros(1, 1), &SimConfig::new(0.9, 4, 1));
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    fn matches_scalar_policy_cost() {
        // Uncontrolled AR(1) from its stationary law: each period costs
        // q * s / (1 - a²) in expectation.
        let sc = GaussianScenario::new(
            scalar_lqr(0.5, 1.0, 1.0),
            DVector::zeros(1),
            &DMatrix::from_element(1, 1, 1.0 / 0.75),
        )
        .unwrap();
        let est = simulate_discounted_cost(&sc, &DMatrix::zeros(1, 1), &SimConfig::new(0.9, 20_000, 3)).unwrap();
        let exact = (1.0 / 0.75) / (1.0 - 0.9);
        assert!(est.z_score(exact).abs() < 4.0, "{} vs {exact}", est.mean);
    }
}
