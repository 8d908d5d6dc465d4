use crate::error::{Error, Result};
use crate::linalg::normal_cdf;

/// Sorted quantization atoms for one scalar coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGrid {
    atoms: Vec<f64>,
}

impl QuantGrid {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::Discretization("grid needs finite atoms".into()));
        }
        atoms.sort_by(f64::total_cmp);
        if atoms.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Discretization("grid atoms must be distinct".into()));
        }
        Ok(Self { atoms })
    }

    /// `n` evenly spaced atoms on `centre ± half_width`.
    pub fn uniform(centre: f64, half_width: f64, n: usize) -> Result<Self> {
        if n == 1 {
            return Self::new(vec![centre]);
        }
        Self::new((0..n).map(|i| centre - half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect())
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Affine image `scale * a + shift` of every atom (`scale > 0`).
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| scale * a + shift).collect())
    }

    /// Index of the nearest atom, ties to the lower one.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &a) in self.atoms.iter().enumerate() {
            if (a - x).abs() < (self.atoms[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Mass of `N(mean, sd²)` on each Voronoi cell (midpoint boundaries,
    /// tails folded into the end atoms). Zero-mass cells are omitted.
    pub fn voronoi_probs(&self, mean: f64, sd: f64) -> Vec<(usize, f64)> {
        if sd == 0.0 {
            return vec![(self.nearest(mean), 1.0)];
        }
        let n = self.atoms.len();
        let mut out = Vec::new();
        let mut lower = 0.0;
        for i in 0..n {
            let upper =
                if i + 1 == n { 1.0 } else { normal_cdf((0.5 * (self.atoms[i] + self.atoms[i + 1]) - mean) / sd) };
            let p = upper - lower;
            if p > 0.0 {
                out.push((i, p));
            }
            lower = upper;
        }
        out
    }

    /// As [`voronoi_probs`](Self::voronoi_probs), but rejects a grid that
    /// is too coarse for the distribution: no cell may hold more than half
    /// of the mass. End cells are measured as mirrored bounded cells, so
    /// the folded tails do not count against them.
    pub fn checked_probs(&self, mean: f64, sd: f64) -> Result<Vec<(usize, f64)>> {
        if sd > 0.0 && self.atoms.len() > 1 {
            let n = self.atoms.len();
            let mid = |i: usize| 0.5 * (self.atoms[i] + self.atoms[i + 1]);
            for i in 0..n {
                let hi = if i + 1 < n { mid(i) } else { 2.0 * self.atoms[i] - mid(i - 1) };
                let lo = if i > 0 { mid(i - 1) } else { 2.0 * self.atoms[0] - mid(0) };
                let p = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
                if p > 0.5 {
                    return Err(Error::Discretization(format!(
                        "cell of atom {} carries mass {p:.3} of N({mean}, {sd}²)",
                        self.atoms[i]
                    )));
                }
            }
        }
        Ok(self.voronoi_probs(mean, sd))
    }
}
