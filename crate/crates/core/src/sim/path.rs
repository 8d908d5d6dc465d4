use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mmfe::trace::PathRecord;
use crate::mmfe::{reveal_column, roll_forecast_vector, ForecastVector, FreshReveal, MmfeModel};

/// Burn-in before a path is emitted: at least `10 L` periods and long
/// enough for the initial condition to decay below `1e-12`.
pub fn burn_in(mmfe: &MmfeModel) -> usize {
    let rho = crate::linalg::spectral_radius(mmfe.g_matrix());
    let decay = if rho > 0.0 { (1e-12f64.ln() / rho.ln()).ceil() as usize } else { 0 };
    (10 * mmfe.trunc_lag()).max(decay)
}

/// Stationary path of the weather (first coordinate) and its `r`-period
/// forecast vector, driven by the counter-based epsilon array of `seed`.
///
/// The full forecast vector up to lookahead `L + 1` is rolled internally,
/// so no long-horizon aggregate is needed; the first `r` entries are
/// emitted. Period numbering starts at zero after the burn-in.
pub fn simulate_mmfe_joint_path(mmfe: &MmfeModel, r: usize, length: usize, seed: u64) -> Result<Vec<PathRecord>> {
    if length == 0 {
        return Err(Error::InvalidParameter("path length must be at least 1".into()));
    }
    let lag = mmfe.trunc_lag();
    if r == 0 || r > lag + 1 {
        return Err(Error::InvalidParameter(format!("forecast horizon r={r} must lie in 1..={}", lag + 1)));
    }
    let d = mmfe.dim();
    let full = lag + 1;
    let burn = burn_in(mmfe) as i64;
    let start = -burn;
    let mean = mmfe.stationary_mean().clone();
    let mut w = mean.clone();
    let mut fvec = ForecastVector::new(start, vec![mean.clone(); full])?;
    let mut out = Vec::with_capacity(length);
    let zero_agg = DVector::zeros(d);
    let mut n = start;
    loop {
        if n >= 0 {
            out.push(PathRecord { n, w: w[0], forecasts: fvec.values()[..r].iter().map(|v| v[0]).collect() });
            if out.len() == length {
                return Ok(out);
            }
        }
        let col = reveal_column(mmfe, n + 1, seed);
        let mut reveals: Vec<DVector<f64>> =
            (0..=lag).map(|i| DVector::from_column_slice(&col[i * d..(i + 1) * d])).collect();
        reveals.push(DVector::zeros(d));
        let fresh = FreshReveal { reveals, aggregate: zero_agg.clone() };
        let (w_next, next) = roll_forecast_vector(mmfe, &fvec, &fresh)?;
        w = w_next;
        fvec = next;
        n += 1;
    }
}

/// Scalar fast path of [`simulate_mmfe_joint_path`]; produces identical
/// records for scalar models.
pub fn simulate_scalar_joint_path(mmfe: &MmfeModel, r: usize, length: usize, seed: u64) -> Result<Vec<PathRecord>> {
    let g = mmfe.scalar_g().ok_or_else(|| Error::Shape("scalar path generator needs scalar weather".into()))?;
    if length == 0 {
        return Err(Error::InvalidParameter("path length must be at least 1".into()));
    }
    let lag = mmfe.trunc_lag();
    if r == 0 || r > lag + 1 {
        return Err(Error::InvalidParameter(format!("forecast horizon r={r} must lie in 1..={}", lag + 1)));
    }
    let ez = mmfe.mean_z()[0];
    let burn = burn_in(mmfe) as i64;
    let mut w = mmfe.stationary_mean()[0];
    let mut f = vec![w; lag + 1];
    let mut out = Vec::with_capacity(length);
    let mut n = -burn;
    loop {
        if n >= 0 {
            out.push(PathRecord { n, w, forecasts: f[..r].to_vec() });
            if out.len() == length {
                return Ok(out);
            }
        }
        let mut col = reveal_column(mmfe, n + 1, seed);
        col.push(0.0);
        w = crate::mmfe::roll_scalar_in_place(g, ez, &mut f, &col, 0.0);
        n += 1;
    }
}
