use nalgebra::DVector;

use super::{EpsilonArray, MmfeModel};
use crate::error::{Error, Result};

fn check_dims(model: &MmfeModel, eps: &EpsilonArray, w: Option<&DVector<f64>>) -> Result<()> {
    if eps.dim() != model.dim() {
        return Err(Error::Shape(format!("array dimension {} vs model {}", eps.dim(), model.dim())));
    }
    if eps.trunc_lag() < model.trunc_lag() {
        return Err(Error::Shape("array truncation lag is shorter than the model's".into()));
    }
    if let Some(w) = w {
        if w.len() != model.dim() {
            return Err(Error::Shape(format!("state of length {} vs model {}", w.len(), model.dim())));
        }
    }
    Ok(())
}

/// `F_{n|k}`, the forecast of `W_n` from the information revealed by time `k`:
///
/// `E W_0 + G^{n-k} (W_k - E W_0) + sum_{r <= k} sum_{i=0}^{n-k-1} G^i eps_{n-i}(r)`,
///
/// with the reveal-time sum cut at the truncation lag.
pub fn forecast(model: &MmfeModel, eps: &EpsilonArray, w_k: &DVector<f64>, k: i64, n: i64) -> Result<DVector<f64>> {
    check_dims(model, eps, Some(w_k))?;
    if n < k {
        return Err(Error::InvalidHorizon { target: n, reveal: k });
    }
    if n == k {
        return Ok(w_k.clone());
    }
    let steps = (n - k) as usize;
    let powers = model.g_powers(steps + 1);
    let mean = model.stationary_mean();
    let mut out = mean + &powers[steps] * (w_k - mean);
    let lag = eps.trunc_lag() as i64;
    let mut revealed = vec![0.0; model.dim()];
    for (i, gi) in powers.iter().enumerate().take(steps) {
        let target = n - i as i64;
        revealed.iter_mut().for_each(|v| *v = 0.0);
        eps.accumulate(target, (target - lag)..=k, &mut revealed)?;
        out += gi * DVector::from_column_slice(&revealed);
    }
    Ok(out)
}

/// Scalar-weather convenience wrapper around [`forecast`].
pub fn forecast_scalar(model: &MmfeModel, eps: &EpsilonArray, w_k: f64, k: i64, n: i64) -> Result<f64> {
    Ok(forecast(model, eps, &DVector::from_element(1, w_k), k, n)?[0])
}

/// `D_{n|k} = sum_{i=0}^{n-k} G^i eps_{n-i}(k)`, the forecast revision made
/// at time `k`.
pub fn martingale_difference(model: &MmfeModel, eps: &EpsilonArray, n: i64, k: i64) -> Result<DVector<f64>> {
    check_dims(model, eps, None)?;
    if k > n {
        return Err(Error::InvalidHorizon { target: n, reveal: k });
    }
    let steps = (n - k) as usize;
    let lag = eps.trunc_lag();
    // Entries with lookahead beyond the lag vanish, so only i >= steps - lag matter.
    let powers = model.g_powers(steps + 1);
    let mut out = DVector::zeros(model.dim());
    for (i, gi) in powers.iter().enumerate() {
        if steps - i > lag {
            continue;
        }
        out += gi * eps.entry(n - i as i64, k)?;
    }
    Ok(out)
}

/// Realized `W_n` given `W_k`, by iterating `W_{m+1} = G W_m + Z_{m+1}` with
/// `Z_m - E Z = sum_{j=0}^{L} eps_m(m - j)`.
pub fn realized_weather(
    model: &MmfeModel,
    eps: &EpsilonArray,
    w_k: &DVector<f64>,
    k: i64,
    n: i64,
) -> Result<DVector<f64>> {
    check_dims(model, eps, Some(w_k))?;
    if n < k {
        return Err(Error::InvalidHorizon { target: n, reveal: k });
    }
    let lag = eps.trunc_lag() as i64;
    let mut w = w_k.clone();
    let mut z = vec![0.0; model.dim()];
    for m in (k + 1)..=n {
        z.iter_mut().for_each(|v| *v = 0.0);
        eps.accumulate(m, (m - lag)..=m, &mut z)?;
        w = model.g_matrix() * w + model.mean_z() + DVector::from_column_slice(&z);
    }
    Ok(w)
}
