//! The fourth-order elliptic operator and its diagonal calculus.
//!
//! The operator is `A u = gamma u'''' - u'' - u` on (0,1) with
//! `u = u'' = 0` at both endpoints. The orthonormal sine functions
//! `sqrt(2) sin(k pi x)` are exact eigenfunctions with eigenvalues
//!
//! ```text
//! lambda_k = gamma (k pi)^4 + (k pi)^2 - 1,
//! ```
//!
//! increasing in `k` and positive from `k = 1` on whenever `gamma > 0`
//! (already `lambda_1 = gamma pi^4 + pi^2 - 1 > 0`). In this basis `A`,
//! the semigroup `exp(-tA)`, and every real power `A^alpha` are diagonal,
//! so all of them reduce to per-mode scalar arithmetic. That is also what
//! makes independent cross-checks cheap: any quadrature- or stepper-based
//! route must agree with a coefficientwise formula.
//!
//! `A` also factors through two second-order problems,
//! `A = gamma (-D^2 + mu_1)(-D^2 + mu_2)` with
//! `mu_{1,2} = (1 +/- sqrt(1 + 4 gamma)) / (2 gamma)`, which satisfy
//! `gamma (mu_1 + mu_2) = 1` and `gamma mu_1 mu_2 = -1`, and
//! `-pi^2 < mu_2 < 0`. The Green's-kernel solver in [`crate::greens`]
//! is built on that factorization.

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// Diagonal representation of the operator on the first `N` sine modes.
#[derive(Debug, Clone)]
pub struct OperatorSpectrum {
    gamma: f64,
    lambdas: Vec<f64>,
}

impl OperatorSpectrum {
    /// Requires `gamma > 0` and at least one mode.
    pub fn new(gamma: f64, n_modes: usize) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!(
                "fourth-order coefficient must be positive and finite, got {gamma}"
            )));
        }
        if n_modes == 0 {
            return Err(Error::config("need at least one mode"));
        }
        let lambdas = (1..=n_modes).map(|k| eigenvalue_raw(gamma, k)).collect();
        Ok(OperatorSpectrum { gamma, lambdas })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// `lambda_k` for 1-based `k`.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.lambdas.len() {
            return Err(Error::ModeIndex {
                index: k,
                n_modes: self.lambdas.len(),
            });
        }
        Ok(self.lambdas[k - 1])
    }

    /// The spectral bottom `lambda_1`, the decay rate of the semigroup.
    pub fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    /// Applies `A` coefficientwise.
    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        self.check_shape(u)?;
        Ok(u.map_modes(|k, a| self.lambdas[k - 1] * a))
    }

    /// Applies the solution semigroup `exp(-tA)` for `t >= 0`.
    ///
    /// Exactly diagonal: each coefficient is damped by `exp(-lambda_k t)`,
    /// so `|| exp(-tA) u || <= exp(-lambda_1 t) || u ||` with equality for
    /// data concentrated on the first mode.
    pub fn apply_semigroup(&self, t: f64, u: &SpectralField) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!(
                "semigroup time must be non-negative, got {t}"
            )));
        }
        self.check_shape(u)?;
        Ok(u.map_modes(|k, a| (-self.lambdas[k - 1] * t).exp() * a))
    }

    /// Applies `A^alpha` for any real `alpha`; all eigenvalues are
    /// positive, so negative powers are well defined.
    pub fn apply_fractional_power(&self, alpha: f64, u: &SpectralField) -> Result<SpectralField> {
        if !alpha.is_finite() {
            return Err(Error::domain(format!("power must be finite, got {alpha}")));
        }
        self.check_shape(u)?;
        Ok(u.map_modes(|k, a| self.lambdas[k - 1].powf(alpha) * a))
    }

    /// Solves `A u = phi` coefficientwise. This is the closed-form route
    /// that the Green's-kernel quadrature is checked against.
    pub fn solve(&self, phi: &SpectralField) -> Result<SpectralField> {
        self.check_shape(phi)?;
        Ok(phi.map_modes(|k, a| a / self.lambdas[k - 1]))
    }

    fn check_shape(&self, u: &SpectralField) -> Result<()> {
        if u.n_modes() != self.lambdas.len() {
            return Err(Error::ShapeMismatch {
                expected: self.lambdas.len(),
                actual: u.n_modes(),
            });
        }
        Ok(())
    }
}

fn eigenvalue_raw(gamma: f64, k: usize) -> f64 {
    let kpi = k as f64 * std::f64::consts::PI;
    let kpi2 = kpi * kpi;
    gamma * kpi2 * kpi2 + kpi2 - 1.0
}

/// Roots `(mu_1, mu_2)` of the second-order factorization
/// `A = gamma (-D^2 + mu_1)(-D^2 + mu_2)`.
///
/// `mu_1 > 0 > mu_2 > -pi^2`, and the pair satisfies
/// `gamma (mu_1 + mu_2) = 1`, `gamma mu_1 mu_2 = -1`.
pub fn factorization_roots(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "fourth-order coefficient must be positive and finite, got {gamma}"
        )));
    }
    let disc = (1.0 + 4.0 * gamma).sqrt();
    let mu1 = (1.0 + disc) / (2.0 * gamma);
    let mu2 = (1.0 - disc) / (2.0 * gamma);
    Ok((mu1, mu2))
}
