use std::ops::RangeInclusive;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::MmfeModel;
use crate::error::{Error, Result};
use crate::rng;

/// Realized disturbances `eps_n(k)` for reveal times `k` in a finite window.
///
/// Storage is dense over `(reveal time, lookahead n - k, coordinate)` with
/// lookaheads `0..=trunc_lag`; entries further ahead are identically zero and
/// are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonArray {
    first_reveal: i64,
    last_reveal: i64,
    trunc_lag: usize,
    dim: usize,
    data: Vec<f64>,
    seed: Option<u64>,
}

impl EpsilonArray {
    pub fn zeros(model: &MmfeModel, reveal_window: RangeInclusive<i64>) -> Result<Self> {
        let (first, last) = (*reveal_window.start(), *reveal_window.end());
        if last < first {
            return Err(Error::InvalidParameter("reveal window is empty".into()));
        }
        let lag = model.trunc_lag();
        let d = model.dim();
        let width = (last - first + 1) as usize;
        Ok(Self {
            first_reveal: first,
            last_reveal: last,
            trunc_lag: lag,
            dim: d,
            data: vec![0.0; width * (lag + 1) * d],
            seed: None,
        })
    }

    /// Independent Gaussian entries with the model's schedule variances.
    ///
    /// Entry `(n, k)` depends only on `(seed, n, k)`, so overlapping windows
    /// sampled with the same seed agree on their common entries.
    pub fn sample(model: &MmfeModel, reveal_window: RangeInclusive<i64>, seed: u64) -> Result<Self> {
        let mut out = Self::zeros(model, reveal_window)?;
        for reveal in out.first_reveal..=out.last_reveal {
            let column = reveal_column(model, reveal, seed);
            let base = out.column_offset(reveal);
            out.data[base..base + column.len()].copy_from_slice(&column);
        }
        out.seed = Some(seed);
        Ok(out)
    }

    pub fn first_reveal(&self) -> i64 {
        self.first_reveal
    }

    pub fn last_reveal(&self) -> i64 {
        self.last_reveal
    }

    pub fn trunc_lag(&self) -> usize {
        self.trunc_lag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Seed the array was sampled with, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn covers(&self, reveal: i64) -> bool {
        (self.first_reveal..=self.last_reveal).contains(&reveal)
    }

    fn column_offset(&self, reveal: i64) -> usize {
        (reveal - self.first_reveal) as usize * (self.trunc_lag + 1) * self.dim
    }

    /// Offset of the entry, or `None` when it lies beyond the truncation lag.
    fn offset(&self, target: i64, reveal: i64) -> Result<Option<usize>> {
        if target < reveal {
            return Err(Error::InvalidHorizon { target, reveal });
        }
        let lookahead = (target - reveal) as usize;
        if lookahead > self.trunc_lag {
            return Ok(None);
        }
        if !self.covers(reveal) {
            return Err(Error::IncompleteArray { target, reveal });
        }
        Ok(Some(self.column_offset(reveal) + lookahead * self.dim))
    }

    pub fn entry(&self, target: i64, reveal: i64) -> Result<DVector<f64>> {
        Ok(match self.offset(target, reveal)? {
            Some(o) => DVector::from_column_slice(&self.data[o..o + self.dim]),
            None => DVector::zeros(self.dim),
        })
    }

    /// Scalar entry for coordinate `coord`.
    pub fn value(&self, target: i64, reveal: i64, coord: usize) -> Result<f64> {
        Ok(match self.offset(target, reveal)? {
            Some(o) => self.data[o + coord],
            None => 0.0,
        })
    }

    /// Overwrites `eps_target(reveal)`. Entries beyond the truncation lag
    /// cannot be made nonzero.
    pub fn set(&mut self, target: i64, reveal: i64, value: &[f64]) -> Result<()> {
        if value.len() != self.dim {
            return Err(Error::Shape(format!("entry of length {} for dimension {}", value.len(), self.dim)));
        }
        match self.offset(target, reveal)? {
            Some(o) => {
                self.data[o..o + self.dim].copy_from_slice(value);
                self.seed = None;
                Ok(())
            }
            None if value.iter().all(|&v| v == 0.0) => Ok(()),
            None => {
                Err(Error::Shape(format!("eps_{target}({reveal}) lies beyond the truncation lag {}", self.trunc_lag)))
            }
        }
    }

    /// Rewrites every stored entry through `f(target, reveal, coord, value)`.
    pub fn map_entries(&mut self, mut f: impl FnMut(i64, i64, usize, f64) -> f64) {
        let stride = (self.trunc_lag + 1) * self.dim;
        for (idx, v) in self.data.iter_mut().enumerate() {
            let reveal = self.first_reveal + (idx / stride) as i64;
            let rem = idx % stride;
            let target = reveal + (rem / self.dim) as i64;
            *v = f(target, reveal, rem % self.dim, *v);
        }
        self.seed = None;
    }

    /// Redraws every entry revealed at `reveal` from `rng`.
    pub fn redraw_reveal_time<R: Rng + ?Sized>(&mut self, model: &MmfeModel, reveal: i64, rng: &mut R) -> Result<()> {
        if !self.covers(reveal) {
            return Err(Error::IncompleteArray { target: reveal, reveal });
        }
        let base = self.column_offset(reveal);
        for lookahead in 0..=self.trunc_lag {
            for c in 0..self.dim {
                let z: f64 = rng.sample(StandardNormal);
                self.data[base + lookahead * self.dim + c] = model.schedule(c).std_dev(lookahead as i64) * z;
            }
        }
        self.seed = None;
        Ok(())
    }

    /// Adds `sum_{r in reveals} eps_target(r)` into `out`, skipping reveal
    /// times whose lookahead exceeds the truncation lag.
    pub fn accumulate(&self, target: i64, reveals: RangeInclusive<i64>, out: &mut [f64]) -> Result<()> {
        let lo = (*reveals.start()).max(target - self.trunc_lag as i64);
        let hi = (*reveals.end()).min(target);
        for r in lo..=hi {
            let o = self.offset(target, r)?.expect("within lag");
            for (acc, v) in out.iter_mut().zip(&self.data[o..o + self.dim]) {
                *acc += v;
            }
        }
        Ok(())
    }
}

/// The draws for reveal time `reveal`, lookahead-major then coordinate.
pub fn reveal_column(model: &MmfeModel, reveal: i64, seed: u64) -> Vec<f64> {
    let d = model.dim();
    let lag = model.trunc_lag();
    let mut rng = rng::stream(seed, &[rng::TAG_EPSILON, reveal as u64]);
    let mut out = Vec::with_capacity((lag + 1) * d);
    for lookahead in 0..=lag {
        for c in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            out.push(model.schedule(c).std_dev(lookahead as i64) * z);
        }
    }
    out
}

/// Samples the array over `reveal_window` with the given seed.
pub fn sample_epsilon_array(model: &MmfeModel, reveal_window: RangeInclusive<i64>, seed: u64) -> Result<EpsilonArray> {
    EpsilonArray::sample(model, reveal_window, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmfe::DisturbanceSchedule;

    fn model(sigma2: f64) -> MmfeModel {
        MmfeModel::scalar(0.6, DisturbanceSchedule::new(sigma2, 0.8, 0.0, 6).unwrap()).unwrap()
    }

    #[test]
    fn same_seed_same_array() {
        let m = model(1.0);
        let a = sample_epsilon_array(&m, -4..=3, 11).unwrap();
        let b = sample_epsilon_array(&m, -4..=3, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_epsilon_array(&m, -4..=3, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overlapping_windows_agree() {
        let m = model(1.0);
        let a = sample_epsilon_array(&m, -4..=3, 5).unwrap();
        let b = sample_epsilon_array(&m, 0..=10, 5).unwrap();
        for k in 0..=3 {
            for n in k..=k + 6 {
                assert_eq!(a.value(n, k, 0).unwrap(), b.value(n, k, 0).unwrap());
            }
        }
    }

    #[test]
    fn zero_schedule_gives_zero_entries() {
        let m = model(0.0);
        let a = sample_epsilon_array(&m, 0..=5, 3).unwrap();
        for k in 0..=5 {
            for n in k..k + 10 {
                assert_eq!(a.value(n, k, 0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn lookup_errors() {
        let m = model(1.0);
        let a = sample_epsilon_array(&m, 0..=5, 3).unwrap();
        assert!(matches!(a.value(1, 2, 0), Err(Error::InvalidHorizon { .. })));
        assert!(matches!(a.value(7, 6, 0), Err(Error::IncompleteArray { .. })));
        assert_eq!(a.value(20, 5, 0).unwrap(), 0.0);
        let mut a = a;
        assert!(a.set(20, 5, &[1.0]).is_err());
        a.set(4, 2, &[0.25]).unwrap();
        assert_eq!(a.value(4, 2, 0).unwrap(), 0.25);
    }

    #[test]
    fn one_step_variance_matches_schedule() {
        // 10^6 draws of eps_{n+1}(n) across distinct reveal times.
        let m = MmfeModel::scalar(0.6, DisturbanceSchedule::new(1.0, 0.95, 0.0, 3).unwrap()).unwrap();
        let a = sample_epsilon_array(&m, 0..=999_999, 2024).unwrap();
        let n = 1_000_000f64;
        let (mut s, mut ss) = (0.0, 0.0);
        for k in 0..1_000_000i64 {
            let v = a.value(k + 1, k, 0).unwrap();
            s += v;
            ss += v * v;
        }
        let mean = s / n;
        let var = ss / n - mean * mean;
        let target = 0.95f64 * 0.95;
        assert!((var - target).abs() / target < 0.01, "var {var}");
    }
}
