//! Markov dynamics of forecasts: the rolling r-period forecast vector, the
//! weather process conditioned on frozen information, and the combination
//! of both.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{forecast, DisturbanceSchedule, EpsilonArray, MmfeModel};
use crate::error::{Error, Result};

/// Forward forecasts `(F_{n+1|n}, ..., F_{n+r|n})` issued at `base_time = n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastVector {
    base_time: i64,
    values: Vec<DVector<f64>>,
}

impl ForecastVector {
    pub fn new(base_time: i64, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("forecast vector needs horizon r >= 1".into()));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::Shape("forecast entries have mixed dimensions".into()));
        }
        Ok(Self { base_time, values })
    }

    pub fn scalar(base_time: i64, values: &[f64]) -> Result<Self> {
        Self::new(base_time, values.iter().map(|&v| DVector::from_element(1, v)).collect())
    }

    /// Forecasts computed directly from `eps` and the current weather `w_n`.
    pub fn from_array(model: &MmfeModel, eps: &EpsilonArray, w_n: &DVector<f64>, n: i64, r: usize) -> Result<Self> {
        let values = (1..=r as i64).map(|j| forecast(model, eps, w_n, n, n + j)).collect::<Result<Vec<_>>>()?;
        Self::new(n, values)
    }

    pub fn base_time(&self) -> i64 {
        self.base_time
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// `F_{n+j|n}` for `1 <= j <= r`.
    pub fn entry(&self, j: usize) -> &DVector<f64> {
        &self.values[j - 1]
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// First coordinate of every entry.
    pub fn scalars(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0]).collect()
    }
}

/// Information revealed at time `n + 1` that drives one roll of the
/// forecast vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FreshReveal {
    /// `eps_{n+1+i}(n+1)` for `0 <= i <= r`.
    pub reveals: Vec<DVector<f64>>,
    /// `sum_{j <= n} eps_{n+1+r}(j)`: earlier information about the period
    /// that newly enters the window.
    pub aggregate: DVector<f64>,
}

impl FreshReveal {
    pub fn zeros(dim: usize, r: usize) -> Self {
        Self { reveals: vec![DVector::zeros(dim); r + 1], aggregate: DVector::zeros(dim) }
    }

    pub fn horizon(&self) -> usize {
        self.reveals.len().saturating_sub(1)
    }

    /// Reads the reveals of time `reveal` (= n+1) and the aggregate for
    /// target `reveal + r` out of `eps`.
    pub fn from_array(eps: &EpsilonArray, reveal: i64, r: usize) -> Result<Self> {
        let reveals = (0..=r as i64).map(|i| eps.entry(reveal + i, reveal)).collect::<Result<Vec<_>>>()?;
        let target = reveal + r as i64;
        let mut agg = vec![0.0; eps.dim()];
        eps.accumulate(target, (target - eps.trunc_lag() as i64)..=(reveal - 1), &mut agg)?;
        Ok(Self { reveals, aggregate: DVector::from_vec(agg) })
    }

    /// Fresh Gaussian reveals; the aggregate is drawn as a single Gaussian
    /// with the summed variance of its (independent) terms.
    pub fn sample<R: Rng + ?Sized>(model: &MmfeModel, r: usize, rng: &mut R) -> Self {
        let d = model.dim();
        let reveals = (0..=r as i64)
            .map(|i| DVector::from_fn(d, |c, _| model.schedule(c).std_dev(i) * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let aggregate = DVector::from_fn(d, |c, _| {
            model.schedule(c).tail_variance(r as i64 + 1).sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        Self { reveals, aggregate }
    }
}

fn check_roll(model: &MmfeModel, fvec: &ForecastVector, fresh: &FreshReveal) -> Result<()> {
    if fresh.reveals.len() != fvec.horizon() + 1 {
        return Err(Error::Shape(format!(
            "forecast horizon {} needs {} reveals, got {}",
            fvec.horizon(),
            fvec.horizon() + 1,
            fresh.reveals.len()
        )));
    }
    let d = model.dim();
    if fvec.dim() != d || fresh.aggregate.len() != d || fresh.reveals.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("dimension mismatch between model, forecasts and reveals".into()));
    }
    Ok(())
}

/// One step of the forecast-vector chain: returns `W_{n+1}` and the
/// forecasts issued at `n + 1`.
///
/// * entry `j < r`: `F_{n+1+j|n+1} = F_{n+1+j|n} + sum_{i=0}^{j} G^i eps_{n+1+j-i}(n+1)`
/// * entry `r`: `G F_{n+r|n} + E Z + aggregate + sum_{i=0}^{r} G^i eps_{n+1+r-i}(n+1)`
/// * `W_{n+1} = F_{n+1|n} + eps_{n+1}(n+1)`
pub fn roll_forecast_vector(
    model: &MmfeModel,
    fvec: &ForecastVector,
    fresh: &FreshReveal,
) -> Result<(DVector<f64>, ForecastVector)> {
    check_roll(model, fvec, fresh)?;
    let r = fvec.horizon();
    let g = model.g_matrix();
    let w_next = fvec.entry(1) + &fresh.reveals[0];
    // revision_j = sum_{i=0}^{j} G^i eps_{n+1+j-i}(n+1) = eps_{n+1+j}(n+1) + G revision_{j-1}
    let mut revision = fresh.reveals[0].clone();
    let mut next = Vec::with_capacity(r);
    for j in 1..=r {
        revision = &fresh.reveals[j] + g * &revision;
        let carried =
            if j < r { fvec.entry(j + 1).clone() } else { g * fvec.entry(r) + model.mean_z() + &fresh.aggregate };
        next.push(carried + &revision);
    }
    Ok((w_next, ForecastVector::new(fvec.base_time + 1, next)?))
}

/// Scalar fast path of [`roll_forecast_vector`], updating `forecasts` in
/// place and returning `W_{n+1}`. `reveals` has length `forecasts.len() + 1`.
pub fn roll_scalar_in_place(g: f64, mean_z: f64, forecasts: &mut [f64], reveals: &[f64], aggregate: f64) -> f64 {
    let r = forecasts.len();
    debug_assert_eq!(reveals.len(), r + 1);
    let w_next = forecasts[0] + reveals[0];
    let mut revision = reveals[0];
    for j in 1..=r {
        revision = reveals[j] + g * revision;
        let carried = if j < r { forecasts[j] } else { g * forecasts[r - 1] + mean_z + aggregate };
        forecasts[j - 1] = carried + revision;
    }
    w_next
}

/// Step of the weather chain conditioned on the information frozen at time
/// `k`: `W_{n+1}(G_k) = G W_n(G_k) + Z_{n+1}(G_k)` with
/// `Z_{n+1}(G_k) = F_{n+1|k} - G F_{n|k} + sum_{r=k+1}^{n+1} eps_{n+1}(r)`.
///
/// `static_forecasts` is `(F_{n+1|k}, F_{n|k})`; `post_k_noise` lists the
/// entries `eps_{n+1}(r)` revealed after `k`.
pub fn conditional_weather_step(
    model: &MmfeModel,
    w_cur: &DVector<f64>,
    static_forecasts: (&DVector<f64>, &DVector<f64>),
    post_k_noise: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let d = model.dim();
    let (f_next, f_cur) = static_forecasts;
    if w_cur.len() != d || f_next.len() != d || f_cur.len() != d || post_k_noise.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("dimension mismatch in conditional weather step".into()));
    }
    let g = model.g_matrix();
    let mut z = f_next - g * f_cur;
    for e in post_k_noise {
        z += e;
    }
    Ok(g * w_cur + z)
}

/// Entries `eps_{n+1}(r)` for `k < r <= n+1`, read from `eps`.
pub fn post_reveal_noise(eps: &EpsilonArray, n: i64, k: i64) -> Result<Vec<DVector<f64>>> {
    if k > n {
        return Err(Error::InvalidHorizon { target: n, reveal: k });
    }
    ((k + 1)..=(n + 1)).map(|r| eps.entry(n + 1, r)).collect()
}

/// `var(Z_{n+1}(G_k) | G_k) = sum_{r=k+1}^{n+1} var eps_{n+1}(r)`.
pub fn conditional_noise_variance(schedule: &DisturbanceSchedule, n: i64, k: i64) -> f64 {
    if n < k {
        return 0.0;
    }
    schedule.plume_variance(n - k)
}

/// The `G_0`-measurable part `sum_{j <= 0} eps_target(j)` of the top-entry
/// noise, read from the frozen time-0 array.
pub fn g0_aggregate(eps: &EpsilonArray, target: i64) -> Result<DVector<f64>> {
    let mut agg = vec![0.0; eps.dim()];
    if target >= 1 {
        eps.accumulate(target, (target - eps.trunc_lag() as i64)..=0, &mut agg)?;
    }
    Ok(DVector::from_vec(agg))
}

/// Step of the forecast-vector chain conditioned on the frozen time-0
/// information.
///
/// `fresh.aggregate` carries only the post-0 part `sum_{j=1}^{n} eps_{n+1+r}(j)`
/// of the long-horizon term; together with the reveals at `n+1` it makes up
/// the remainder independent of `G_0` and `G_{n,r}`.
pub fn conditional_forecast_roll(
    model: &MmfeModel,
    fvec: &ForecastVector,
    g0_aggregate: &DVector<f64>,
    fresh: &FreshReveal,
) -> Result<(DVector<f64>, ForecastVector)> {
    if g0_aggregate.len() != model.dim() {
        return Err(Error::Shape("G_0 aggregate has wrong dimension".into()));
    }
    let combined = FreshReveal { reveals: fresh.reveals.clone(), aggregate: &fresh.aggregate + g0_aggregate };
    roll_forecast_vector(model, fvec, &combined)
}

/// Post-0 part of the aggregate for the roll from `n` to `n+1`, read from a
/// full array: `sum_{j=1}^{n} eps_{n+1+r}(j)`.
pub fn post_g0_aggregate(eps: &EpsilonArray, n: i64, r: usize) -> Result<DVector<f64>> {
    let target = n + 1 + r as i64;
    let mut agg = vec![0.0; eps.dim()];
    if n >= 1 {
        let lo = 1.max(target - eps.trunc_lag() as i64);
        if lo <= n {
            eps.accumulate(target, lo..=n, &mut agg)?;
        }
    }
    Ok(DVector::from_vec(agg))
}

/// Stationary variance of the revision `sum_{i=0}^{j} g^i eps_{n+1+j-i}(n+1)`
/// of entry `j` (scalar weather).
pub fn revision_variance(g: f64, schedule: &DisturbanceSchedule, j: usize) -> f64 {
    (0..=j).map(|i| g.powi(2 * i as i32) * schedule.variance((j - i) as i64)).sum()
}

/// Conditional variance given `G_0` of the top-entry noise of the roll from
/// `n` to `n+1` (scalar weather): the post-0 aggregate plus the revision.
pub fn conditional_top_variance(g: f64, schedule: &DisturbanceSchedule, n: i64, r: usize) -> f64 {
    let target = n + 1 + r as i64;
    // eps_target(j) for 1 <= j <= n has lookahead target - j in [r+1, n+r].
    let post0 = if n >= 1 { schedule.variance_sum(target - n, target - 1) } else { 0.0 };
    post0 + revision_variance(g, schedule, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmfe::{realized_weather, sample_epsilon_array};

    fn model(lag: usize, mean_z: f64) -> MmfeModel {
        MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.8, mean_z, lag).unwrap()).unwrap()
    }

    #[test]
    fn zero_noise_roll_is_shift_and_extrapolation() {
        let m = model(4, 0.0);
        let f = ForecastVector::scalar(0, &[2.0, 1.2]).unwrap();
        let (w, next) = roll_forecast_vector(&m, &f, &FreshReveal::zeros(1, 2)).unwrap();
        assert_eq!(w[0], 2.0);
        let v = next.scalars();
        assert_eq!(v[0], 1.2);
        assert!((v[1] - 0.72).abs() < 1e-15);
        assert_eq!(next.base_time(), 1);
    }

    #[test]
    fn arbitrary_start_is_accepted() {
        let m = model(4, 0.0);
        let f = ForecastVector::scalar(0, &[100.0, -7.0]).unwrap();
        let mut rng = crate::rng::stream(1, &[0]);
        let fresh = FreshReveal::sample(&m, 2, &mut rng);
        let (w, next) = roll_forecast_vector(&m, &f, &fresh).unwrap();
        assert!(w[0].is_finite());
        assert_eq!(next.horizon(), 2);
    }

    #[test]
    fn horizon_mismatch_is_a_shape_error() {
        let m = model(4, 0.0);
        let f = ForecastVector::scalar(0, &[1.0, 2.0]).unwrap();
        assert!(matches!(roll_forecast_vector(&m, &f, &FreshReveal::zeros(1, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn rolled_forecasts_match_direct_formula() {
        let m = model(5, 0.7);
        let eps = sample_epsilon_array(&m, -20..=20, 77).unwrap();
        let r = 3;
        let mut w = DVector::from_element(1, 1.75);
        let mut fvec = ForecastVector::from_array(&m, &eps, &w, 0, r).unwrap();
        for n in 0..6 {
            let fresh = FreshReveal::from_array(&eps, n + 1, r).unwrap();
            let (w_next, next) = roll_forecast_vector(&m, &fvec, &fresh).unwrap();
            let w_direct = realized_weather(&m, &eps, &w, n, n + 1).unwrap();
            assert!((&w_next - &w_direct).amax() < 1e-12);
            let direct = ForecastVector::from_array(&m, &eps, &w_next, n + 1, r).unwrap();
            for j in 1..=r {
                assert!((next.entry(j) - direct.entry(j)).amax() < 1e-12);
            }
            w = w_next;
            fvec = next;
        }
    }

    #[test]
    fn scalar_fast_path_matches_generic() {
        let m = model(5, 0.3);
        let mut rng = crate::rng::stream(4, &[1]);
        let fvec = ForecastVector::scalar(0, &[0.4, -1.0, 2.5]).unwrap();
        let fresh = FreshReveal::sample(&m, 3, &mut rng);
        let (w, next) = roll_forecast_vector(&m, &fvec, &fresh).unwrap();
        let mut f = fvec.scalars();
        let reveals: Vec<f64> = fresh.reveals.iter().map(|v| v[0]).collect();
        let w2 = roll_scalar_in_place(0.6, 0.3, &mut f, &reveals, fresh.aggregate[0]);
        assert!((w[0] - w2).abs() < 1e-14);
        for (a, b) in next.scalars().iter().zip(&f) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn conditional_step_without_new_information_is_the_forecast() {
        let m = model(4, 0.5);
        let eps = sample_epsilon_array(&m, -10..=10, 2).unwrap();
        let k = 3;
        let w_k = DVector::from_element(1, 0.9);
        let f1 = forecast(&m, &eps, &w_k, k, k + 1).unwrap();
        let zero = vec![DVector::zeros(1)];
        let w = conditional_weather_step(&m, &w_k, (&f1, &w_k), &zero).unwrap();
        assert!((w - f1).amax() < 1e-14);
    }

    #[test]
    fn conditional_chain_reproduces_realized_weather() {
        // Feeding the realized post-k entries through the conditional chain
        // must give back the realized weather path exactly.
        let m = model(4, 0.5);
        let eps = sample_epsilon_array(&m, -10..=12, 8).unwrap();
        let k = 2;
        let w_k = DVector::from_element(1, -0.3);
        let mut w = w_k.clone();
        for n in k..8 {
            let f_next = forecast(&m, &eps, &w_k, k, n + 1).unwrap();
            let f_cur = forecast(&m, &eps, &w_k, k, n).unwrap();
            let noise = post_reveal_noise(&eps, n, k).unwrap();
            w = conditional_weather_step(&m, &w, (&f_next, &f_cur), &noise).unwrap();
            let direct = realized_weather(&m, &eps, &w_k, k, n + 1).unwrap();
            assert!((&w - &direct).amax() < 1e-12);
        }
    }

    #[test]
    fn conditional_roll_matches_unconditional_roll_on_the_same_array() {
        let m = model(6, 0.2);
        let eps = sample_epsilon_array(&m, -20..=20, 31).unwrap();
        let r = 2;
        let w0 = DVector::from_element(1, 0.4);
        let mut fvec = ForecastVector::from_array(&m, &eps, &w0, 0, r).unwrap();
        let mut fvec_c = fvec.clone();
        for n in 0..8 {
            let fresh = FreshReveal::from_array(&eps, n + 1, r).unwrap();
            let (_, next) = roll_forecast_vector(&m, &fvec, &fresh).unwrap();
            let g0 = g0_aggregate(&eps, n + 1 + r as i64).unwrap();
            let post =
                FreshReveal { reveals: fresh.reveals.clone(), aggregate: post_g0_aggregate(&eps, n, r).unwrap() };
            let (_, next_c) = conditional_forecast_roll(&m, &fvec_c, &g0, &post).unwrap();
            for j in 1..=r {
                assert!((next.entry(j) - next_c.entry(j)).amax() < 1e-12);
            }
            fvec = next;
            fvec_c = next_c;
        }
    }

    #[test]
    fn conditional_top_variance_grows_then_saturates() {
        let s = DisturbanceSchedule::new(1.0, 0.9, 0.0, 30).unwrap();
        let mut prev = 0.0;
        for n in 0..60 {
            let v = conditional_top_variance(0.6, &s, n, 2);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        // Once all pre-0 entries are beyond the lag, the conditioning is
        // void and the variance equals the unconditional one.
        let uncond = revision_variance(0.6, &s, 2) + s.tail_variance(3);
        assert!((prev - uncond).abs() < 1e-12);
    }
}
