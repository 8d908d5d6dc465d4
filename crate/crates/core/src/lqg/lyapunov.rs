use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, spectral_radius, symmetrize};

/// Solver for the discrete Lyapunov equation `X = A X Aᵀ + S`.
pub trait LyapunovSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, a: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

fn check(a: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || noise_cov.shape() != a.shape() {
        return Err(Error::Shape(format!("A {:?}, Sigma {:?}", a.shape(), noise_cov.shape())));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 - 1e-10 {
        return Err(Error::Unstable(rho));
    }
    Ok(())
}

/// Fixed-point iteration from zero.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointLyapunov {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointLyapunov {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 1_000_000 }
    }
}

impl LyapunovSolver for FixedPointLyapunov {
    fn name(&self) -> &'static str {
        "fixed-point"
    }

    fn solve(&self, a: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        lyapunov_stationary_cov(a, noise_cov, self.tol, self.max_iter)
    }
}

/// Direct solve of `(I - A ⊗ A) vec X = vec S`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KroneckerLyapunov;

impl LyapunovSolver for KroneckerLyapunov {
    fn name(&self) -> &'static str {
        "kronecker"
    }

    fn solve(&self, a: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check(a, noise_cov)?;
        let m = a.nrows();
        let lhs = DMatrix::identity(m * m, m * m) - a.kronecker(a);
        let rhs = nalgebra::DVector::from_column_slice(noise_cov.as_slice());
        let x = lhs.lu().solve(&rhs).ok_or_else(|| Error::Unstable(spectral_radius(a)))?;
        Ok(symmetrize(&DMatrix::from_column_slice(m, m, x.as_slice())))
    }
}

/// Iterates `X <- A X Aᵀ + S` from `X = 0` until the Frobenius change is
/// below `tol · max(1, ‖X‖_F)`.
pub fn lyapunov_stationary_cov(
    a: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    check(a, noise_cov)?;
    let mut x = DMatrix::zeros(a.nrows(), a.ncols());
    let mut diff = f64::INFINITY;
    for _ in 0..max_iter {
        let next = symmetrize(&(a * &x * a.transpose() + noise_cov));
        diff = frobenius(&(&next - &x));
        x = next;
        if diff < tol * frobenius(&x).max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: diff })
}
