use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, is_symmetric, min_eigenvalue, symmetrize};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Discounted LQ problem with additive i.i.d. noise:
/// `z' = A z + B a + xi`, stage cost `zᵀQz + aᵀRa`, discount `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedLqr {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    alpha: f64,
    noise_cov: DMatrix<f64>,
}

impl DiscountedLqr {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        alpha: f64,
        noise_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let m = a.nrows();
        if !a.is_square() || b.nrows() != m || q.shape() != (m, m) || noise_cov.shape() != (m, m) {
            return Err(Error::Shape(format!(
                "A {:?}, B {:?}, Q {:?}, Sigma {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                noise_cov.shape()
            )));
        }
        let p = b.ncols();
        if r.shape() != (p, p) {
            return Err(Error::Shape(format!("R is {:?}, expected {p}x{p}", r.shape())));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("discount {alpha} outside (0, 1)")));
        }
        for (name, mat) in [("Q", &q), ("R", &r), ("noise covariance", &noise_cov)] {
            if !is_symmetric(mat, 1e-12 * mat.amax().max(1.0)) {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
        }
        for (name, mat) in [("Q", &q), ("noise covariance", &noise_cov)] {
            if min_eigenvalue(mat) < -1e-10 * mat.amax().max(1.0) {
                return Err(Error::InvalidParameter(format!("{name} is not positive semidefinite")));
            }
        }
        if p > 0 && min_eigenvalue(&r) <= 0.0 {
            return Err(Error::InvalidParameter("R is not positive definite".into()));
        }
        Ok(Self { a, b, q, r, alpha, noise_cov })
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn inner_inverse(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let s = symmetrize(&((self.b.transpose() * k * &self.b) * self.alpha + &self.r));
        // R is PD and K PSD, so S is PD.
        s.cholesky().expect("alpha BᵀKB + R must be positive definite").inverse()
    }

    /// One application of the discounted Riccati map.
    pub fn riccati_step(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let alpha = self.alpha;
        let kb = k * &self.b;
        let inner = k * alpha - &kb * self.inner_inverse(k) * kb.transpose() * (alpha * alpha);
        symmetrize(&(self.a.transpose() * inner * &self.a + &self.q))
    }

    /// `alpha (alpha BᵀKB + R)^{-1} BᵀK A`.
    pub fn gain_for(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner_inverse(k) * self.b.transpose() * k * &self.a * self.alpha
    }

    /// Value-iteration sequence `K_0 = Q, K_1, ...`.
    pub fn iterates(&self) -> impl Iterator<Item = DMatrix<f64>> + '_ {
        std::iter::successors(Some(self.q.clone()), move |k| Some(self.riccati_step(k)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub k_matrix: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub noise_constant: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl RiccatiSolution {
    /// `zᵀKz + alpha/(1-alpha) tr(K Sigma)`.
    pub fn value_at(&self, z: &DVector<f64>) -> Result<f64> {
        if z.len() != self.k_matrix.nrows() {
            return Err(Error::Shape(format!("state of length {} vs {}", z.len(), self.k_matrix.nrows())));
        }
        Ok(z.dot(&(&self.k_matrix * z)) + self.noise_constant)
    }

    pub fn optimal_action(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.gain.ncols() {
            return Err(Error::Shape(format!("state of length {} vs {}", z.len(), self.gain.ncols())));
        }
        Ok(-(&self.gain * z))
    }

    /// Expected optimal cost from an initial state with second moment `m`.
    pub fn expected_value(&self, second_moment: &DMatrix<f64>) -> f64 {
        (&self.k_matrix * second_moment).trace() + self.noise_constant
    }
}

pub fn riccati_solve(problem: &DiscountedLqr, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let mut k = problem.q.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = problem.riccati_step(&k);
        residual = frobenius(&(&next - &k));
        k = next;
        if residual < tol {
            let gain = problem.gain_for(&k);
            let alpha = problem.alpha;
            let noise_constant = alpha / (1.0 - alpha) * (&k * &problem.noise_cov).trace();
            return Ok(RiccatiSolution { k_matrix: k, gain, noise_constant, iterations: it, residual });
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}

/// `‖Riccati(K) − K‖_F`.
pub fn fixed_point_residual(problem: &DiscountedLqr, k: &DMatrix<f64>) -> f64 {
    frobenius(&(problem.riccati_step(k) - k))
}

/// Matrix `P` such that the discounted cost of the stationary linear policy
/// `a = -L z` from state `z` is `zᵀPz + alpha/(1-alpha) tr(P Sigma)`.
pub fn policy_cost_matrix(
    problem: &DiscountedLqr,
    gain: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    if gain.shape() != (problem.control_dim(), problem.state_dim()) {
        return Err(Error::Shape(format!("gain is {:?}", gain.shape())));
    }
    let closed = &problem.a - &problem.b * gain;
    let stage = &problem.q + gain.transpose() * &problem.r * gain;
    let scaled = &closed * problem.alpha.sqrt();
    let mut p = stage.clone();
    for _ in 0..max_iter {
        let next = symmetrize(&(scaled.transpose() * &p * &scaled + &stage));
        let diff = frobenius(&(&next - &p));
        p = next;
        if diff < tol {
            return Ok(p);
        }
        if !diff.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: f64::NAN })
}

/// Row-major CSV dump with a `# rows,cols` header line.
pub fn write_matrix_csv<W: Write>(out: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(out, "# {},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, q: f64, r: f64, alpha: f64, s: f64) -> DiscountedLqr {
        let m = |x| DMatrix::from_element(1, 1, x);
        DiscountedLqr::new(m(a), m(b), m(q), m(r), alpha, m(s)).unwrap()
    }

    #[test]
    fn zero_dynamics_collapses_to_q() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = DiscountedLqr::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            q.clone(),
            DMatrix::from_element(1, 1, 1.0),
            0.9,
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let sol = riccati_solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.k_matrix, q);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn zero_cost_gives_zero_control() {
        let sol = riccati_solve(&scalar(0.9, 1.0, 0.0, 2.0, 0.9, 1.0), DEFAULT_TOL, 10).unwrap();
        assert_eq!(sol.k_matrix[(0, 0)], 0.0);
        assert_eq!(sol.gain[(0, 0)], 0.0);
    }

    #[test]
    fn value_and_action_basics() {
        let sol = riccati_solve(&scalar(0.9, 1.0, 1.0, 1.0, 0.9, 0.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let z = DVector::from_element(1, 0.0);
        assert_eq!(sol.value_at(&z).unwrap(), 0.0);
        assert_eq!(sol.optimal_action(&z).unwrap()[0], 0.0);
        let z = DVector::from_element(1, 1.3);
        assert_eq!(sol.value_at(&z).unwrap(), sol.value_at(&(-&z)).unwrap());
        let a1 = sol.optimal_action(&z).unwrap()[0];
        let a2 = sol.optimal_action(&(&z * 2.0)).unwrap()[0];
        assert!((a2 - 2.0 * a1).abs() < 1e-15);
        assert!(sol.value_at(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let m = |x| DMatrix::from_element(1, 1, x);
        assert!(DiscountedLqr::new(m(0.5), m(1.0), m(1.0), m(0.0), 0.9, m(1.0)).is_err());
        assert!(DiscountedLqr::new(m(0.5), m(1.0), m(1.0), m(1.0), 1.0, m(1.0)).is_err());
        assert!(DiscountedLqr::new(m(0.5), m(1.0), m(-1.0), m(1.0), 0.9, m(1.0)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(DiscountedLqr::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            asym,
            m(1.0),
            0.9,
            DMatrix::zeros(2, 2)
        )
        .is_err());
    }

    #[test]
    fn iteration_limit_reports_residual() {
        match riccati_solve(&scalar(0.99, 1.0, 1.0, 1.0, 0.99, 1.0), 1e-12, 3) {
            Err(Error::NonConvergence { iterations: 3, residual }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn optimal_gain_has_policy_cost_equal_to_k() {
        let p = scalar(0.95, 0.5, 1.0, 0.3, 0.9, 1.0);
        let sol = riccati_solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let pc = policy_cost_matrix(&p, &sol.gain, 1e-13, 100_000).unwrap();
        assert!((pc[(0, 0)] - sol.k_matrix[(0, 0)]).abs() < 1e-9);
    }

    #[test]
    fn matrix_dump_has_shape_header() {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("# 2,3"));
        assert_eq!(text.lines().count(), 3);
    }
}
