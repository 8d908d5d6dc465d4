use nalgebra::{DMatrix, DVector};

use super::DisturbanceSchedule;
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;

/// Linear state space weather model `W_{n+1} = G W_n + Z_{n+1}` whose
/// innovations are split into a triangular array of forecast revisions.
///
/// Each coordinate carries its own [`DisturbanceSchedule`]; coordinates of
/// the array are independent.
#[derive(Debug, Clone)]
pub struct MmfeModel {
    g: DMatrix<f64>,
    schedules: Vec<DisturbanceSchedule>,
    mean_z: DVector<f64>,
    stationary_mean: DVector<f64>,
}

impl MmfeModel {
    pub fn new(g: DMatrix<f64>, schedules: Vec<DisturbanceSchedule>) -> Result<Self> {
        let d = g.nrows();
        if d == 0 || !g.is_square() {
            return Err(Error::Shape(format!("G must be square and nonempty, got {}x{}", g.nrows(), g.ncols())));
        }
        if schedules.len() != d {
            return Err(Error::Shape(format!("{} schedules for dimension {d}", schedules.len())));
        }
        let radius = spectral_radius(&g);
        if radius >= 1.0 {
            return Err(Error::Unstable(radius));
        }
        let mean_z = DVector::from_iterator(d, schedules.iter().map(|s| s.mean_z()));
        let stationary_mean = (DMatrix::identity(d, d) - &g)
            .lu()
            .solve(&mean_z)
            .ok_or_else(|| Error::InvalidParameter("I - G is singular".into()))?;
        Ok(Self { g, schedules, mean_z, stationary_mean })
    }

    /// Scalar weather, `W_{n+1} = g W_n + Z_{n+1}`.
    pub fn scalar(g: f64, schedule: DisturbanceSchedule) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, g), vec![schedule])
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn schedule(&self, coord: usize) -> &DisturbanceSchedule {
        &self.schedules[coord]
    }

    pub fn schedules(&self) -> &[DisturbanceSchedule] {
        &self.schedules
    }

    /// Largest truncation lag over the coordinates.
    pub fn trunc_lag(&self) -> usize {
        self.schedules.iter().map(|s| s.trunc_lag()).max().unwrap_or(1)
    }

    /// `E Z_1`.
    pub fn mean_z(&self) -> &DVector<f64> {
        &self.mean_z
    }

    /// `E W_0 = (I - G)^{-1} E Z_1`.
    pub fn stationary_mean(&self) -> &DVector<f64> {
        &self.stationary_mean
    }

    /// `G^0, G^1, ..., G^count-1`.
    pub fn g_powers(&self, count: usize) -> Vec<DMatrix<f64>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(count);
        let mut p = DMatrix::identity(d, d);
        for _ in 0..count {
            let next = &p * &self.g;
            out.push(p);
            p = next;
        }
        out
    }

    /// Scalar `g`, when `dim() == 1`.
    pub fn scalar_g(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.g[(0, 0)])
    }

    /// Same dynamics and variances with `E Z = 0`, i.e. the model of the
    /// centred weather `W - E W_0`.
    pub fn centred(&self) -> Self {
        let schedules = self
            .schedules
            .iter()
            .map(|s| DisturbanceSchedule::new(s.sigma2(), s.gamma(), 0.0, s.trunc_lag()).expect("valid schedule"))
            .collect();
        Self::new(self.g.clone(), schedules).expect("valid model")
    }
}
