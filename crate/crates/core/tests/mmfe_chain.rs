use mmfe_core::mmfe::{
    conditional_noise_variance, forecast, martingale_difference, realized_weather, roll_forecast_vector,
    roll_scalar_in_place, sample_epsilon_array, DisturbanceSchedule, ForecastVector, FreshReveal, MmfeModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #[test]
    fn scalar_roll_matches_generic_roll(
        g in 0.0f64..0.95,
        mean_z in -5.0f64..5.0,
        f in prop::collection::vec(-50.0f64..50.0, 1..5),
        seed in any::<u64>(),
    ) {
        let r = f.len();
        let m = MmfeModel::scalar(g, DisturbanceSchedule::new(1.3, 0.7, mean_z, 6).unwrap()).unwrap();
        let mut rng = mmfe_core::rng::stream(seed, &[0]);
        let fresh = FreshReveal::sample(&m, r, &mut rng);
        let (w, next) = roll_forecast_vector(&m, &ForecastVector::scalar(0, &f).unwrap(), &fresh).unwrap();
        let mut fast = f.clone();
        let reveals: Vec<f64> = fresh.reveals.iter().map(|v| v[0]).collect();
        let w2 = roll_scalar_in_place(g, mean_z, &mut fast, &reveals, fresh.aggregate[0]);
        prop_assert!((w[0] - w2).abs() <= 1e-12 * (1.0 + w2.abs()));
        for (a, b) in next.scalars().iter().zip(&fast) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn telescoping_holds_per_path(seed in any::<u64>(), n in 2i64..10) {
        let m = MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.9, 32.0, 12).unwrap()).unwrap();
        let eps = sample_epsilon_array(&m, -15..=12, seed).unwrap();
        let w0 = DVector::from_element(1, 80.0);
        let base = forecast(&m, &eps, &w0, 0, n).unwrap();
        let mut acc = base.clone();
        for k in 1..=n {
            acc += martingale_difference(&m, &eps, n, k).unwrap();
            let w_k = realized_weather(&m, &eps, &w0, 0, k).unwrap();
            let direct = forecast(&m, &eps, &w_k, k, n).unwrap();
            prop_assert!((&direct - &acc).amax() < 1e-12 * 80.0);
        }
        let w_n = realized_weather(&m, &eps, &w0, 0, n).unwrap();
        prop_assert!((forecast(&m, &eps, &w_n, n, n).unwrap() - w_n).amax() == 0.0);
    }
}

#[test]
fn plume_variance_is_the_geometric_partial_sum() {
    let s = DisturbanceSchedule::new(2.0, 0.9, 0.0, 40).unwrap();
    for steps in 0..60i64 {
        let j = steps.min(40) as i32;
        let closed = 2.0 * (1.0 - 0.81f64.powi(j + 1)) / (1.0 - 0.81);
        assert!((conditional_noise_variance(&s, steps + 3, 3) - closed).abs() < 1e-12);
    }
}

#[test]
fn vector_weather_roll_matches_direct_forecasts() {
    let g = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]);
    let schedules =
        vec![DisturbanceSchedule::new(1.0, 0.8, 1.0, 5).unwrap(), DisturbanceSchedule::new(0.5, 0.6, -2.0, 5).unwrap()];
    let m = MmfeModel::new(g, schedules).unwrap();
    let eps = sample_epsilon_array(&m, -12..=12, 99).unwrap();
    let r = 3;
    let mut w = DVector::from_vec(vec![0.3, -1.0]);
    let mut fvec = ForecastVector::from_array(&m, &eps, &w, 0, r).unwrap();
    for n in 0..5 {
        let fresh = FreshReveal::from_array(&eps, n + 1, r).unwrap();
        let (w_next, next) = roll_forecast_vector(&m, &fvec, &fresh).unwrap();
        let direct = ForecastVector::from_array(&m, &eps, &w_next, n + 1, r).unwrap();
        assert!((&w_next - realized_weather(&m, &eps, &w, n, n + 1).unwrap()).amax() < 1e-12);
        for j in 1..=r {
            assert!((next.entry(j) - direct.entry(j)).amax() < 1e-12);
        }
        w = w_next;
        fvec = next;
    }
}
