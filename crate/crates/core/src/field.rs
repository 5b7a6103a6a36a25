//! Functions on (0,1) stored as coefficients in the orthonormal sine basis.
//!
//! The basis is `e_k(x) = sqrt(2) sin(k pi x)` for `k = 1..=N`, which is
//! orthonormal in `L^2(0,1)` and satisfies the clamped-moment boundary
//! conditions `u = u'' = 0` at both endpoints. Every field in this crate
//! lives in the span of the first `N` basis functions, so the `L^2` norm
//! is the Euclidean norm of the coefficient vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A function on (0,1) represented by its sine-basis coefficients.
///
/// Invariant: every stored coefficient is finite. Constructors enforce
/// this; arithmetic preserves it except for overflow, which the stepping
/// code guards against separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    /// Wraps a coefficient vector, rejecting empty or non-finite data.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::config("a field needs at least one mode"));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite coefficient {} at mode {}",
                coeffs[k],
                k + 1
            )));
        }
        Ok(SpectralField { coeffs })
    }

    /// The zero field with `n_modes` coefficients.
    pub fn zeros(n_modes: usize) -> Self {
        SpectralField {
            coeffs: vec![0.0; n_modes],
        }
    }

    /// `amplitude * e_k`, the k-th orthonormal basis function scaled.
    /// `k` is 1-based.
    pub fn basis(n_modes: usize, k: usize, amplitude: f64) -> Result<Self> {
        if k == 0 || k > n_modes {
            return Err(Error::ModeIndex { index: k, n_modes });
        }
        let mut coeffs = vec![0.0; n_modes];
        coeffs[k - 1] = amplitude;
        SpectralField::new(coeffs)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of the k-th basis function (1-based).
    pub fn coeff(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.coeffs.len() {
            return Err(Error::ModeIndex {
                index: k,
                n_modes: self.coeffs.len(),
            });
        }
        Ok(self.coeffs[k - 1])
    }

    /// `L^2(0,1)` norm; equals the Euclidean coefficient norm because the
    /// basis is orthonormal.
    pub fn norm_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `L^2` inner product with another field of the same mode count.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Largest coefficient magnitude; the quantity the divergence guard
    /// watches.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// `self + scale * other`, the workhorse of the steppers.
    pub fn add_scaled(&self, scale: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(SpectralField { coeffs })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, factor: f64) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Applies a per-mode map `(k, a_k) -> a_k'` (k is 1-based). Used to
    /// implement every diagonal operator in one place.
    pub fn map_modes(&self, mut f: impl FnMut(usize, f64) -> f64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| f(i + 1, a))
            .collect();
        SpectralField { coeffs }
    }

    fn check_shape(&self, other: &SpectralField) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::ShapeMismatch {
                expected: self.coeffs.len(),
                actual: other.coeffs.len(),
            });
        }
        Ok(())
    }

    /// Serializes as CSV with a `k,a_k` header, one row per mode.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,a_k\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, c));
        }
        out
    }

    /// Parses the CSV layout produced by [`SpectralField::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut coeffs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('k')) {
                continue;
            }
            let mut parts = line.split(',');
            let k: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::config(format!("bad mode index on line {}", lineno + 1)))?;
            let a: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::config(format!("bad coefficient on line {}", lineno + 1)))?;
            if k != coeffs.len() + 1 {
                return Err(Error::config(format!(
                    "mode indices must be consecutive from 1, got {} on line {}",
                    k,
                    lineno + 1
                )));
            }
            coeffs.push(a);
        }
        SpectralField::new(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_finite_coefficients() {
        assert!(SpectralField::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralField::new(vec![f64::INFINITY]).is_err());
        assert!(SpectralField::new(vec![]).is_err());
    }

    #[test]
    fn norm_is_euclidean() {
        let u = SpectralField::new(vec![3.0, 4.0]).unwrap();
        assert_relative_eq!(u.norm_l2(), 5.0);
    }

    #[test]
    fn basis_field_is_unit_norm() {
        let e2 = SpectralField::basis(4, 2, 1.0).unwrap();
        assert_eq!(e2.coeffs(), &[0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(e2.norm_l2(), 1.0);
        assert!(SpectralField::basis(4, 0, 1.0).is_err());
        assert!(SpectralField::basis(4, 5, 1.0).is_err());
    }

    #[test]
    fn shape_mismatch_detected() {
        let u = SpectralField::zeros(3);
        let v = SpectralField::zeros(4);
        assert!(matches!(
            u.inner(&v),
            Err(Error::ShapeMismatch {
                expected: 3,
                actual: 4
            })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let u = SpectralField::new(vec![0.5, -1.25e-3, 7.0]).unwrap();
        let csv = u.to_csv();
        let back = SpectralField::from_csv(&csv).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn csv_rejects_gaps() {
        assert!(SpectralField::from_csv("k,a_k\n1,0.5\n3,0.25\n").is_err());
    }
}
