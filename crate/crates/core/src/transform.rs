//! Conversion between sine coefficients and collocation samples.
//!
//! Collocation nodes are the uniform interior points `x_j = j/(M+1)`,
//! `j = 1..=M`. At these nodes the sine family satisfies the discrete
//! orthogonality
//!
//! ```text
//! sum_{j=1}^{M} sin(k pi x_j) sin(l pi x_j) = (M+1)/2 * delta_{kl},   k,l <= M,
//! ```
//!
//! so the forward transform below is the exact inverse of sampling as
//! long as `M >= N`. That makes spectral -> physical -> spectral a
//! round trip at machine precision, which downstream code relies on when
//! it evaluates nonlinearities pointwise.

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// Dense sine transform between `N` modes and `M >= N` interior nodes.
#[derive(Debug, Clone)]
pub struct SineTransform {
    n_modes: usize,
    n_nodes: usize,
    /// Row-major `M x N` matrix with entries `sqrt(2) sin(k pi x_j)`.
    basis: Vec<f64>,
    nodes: Vec<f64>,
}

impl SineTransform {
    pub fn new(n_modes: usize, n_nodes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::config("need at least one mode"));
        }
        if n_nodes < n_modes {
            return Err(Error::config(format!(
                "collocation grid too coarse: {} nodes for {} modes (need M >= N)",
                n_nodes, n_modes
            )));
        }
        let m1 = (n_nodes + 1) as f64;
        let nodes: Vec<f64> = (1..=n_nodes).map(|j| j as f64 / m1).collect();
        let mut basis = Vec::with_capacity(n_nodes * n_modes);
        for &x in &nodes {
            for k in 1..=n_modes {
                basis.push(std::f64::consts::SQRT_2 * (k as f64 * std::f64::consts::PI * x).sin());
            }
        }
        Ok(SineTransform {
            n_modes,
            n_nodes,
            basis,
            nodes,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Interior collocation nodes `j/(M+1)`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Evaluates the field at every collocation node.
    pub fn to_physical(&self, u: &SpectralField) -> Result<Vec<f64>> {
        if u.n_modes() != self.n_modes {
            return Err(Error::ShapeMismatch {
                expected: self.n_modes,
                actual: u.n_modes(),
            });
        }
        let coeffs = u.coeffs();
        let mut samples = vec![0.0; self.n_nodes];
        for (j, s) in samples.iter_mut().enumerate() {
            let row = &self.basis[j * self.n_modes..(j + 1) * self.n_modes];
            *s = row.iter().zip(coeffs).map(|(b, a)| b * a).sum();
        }
        Ok(samples)
    }

    /// Projects node samples onto the first `N` sine modes using discrete
    /// orthogonality. Exact (up to roundoff) for data in the span of the
    /// first `M` modes.
    pub fn to_spectral(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.n_nodes {
            return Err(Error::ShapeMismatch {
                expected: self.n_nodes,
                actual: samples.len(),
            });
        }
        let weight = 1.0 / (self.n_nodes as f64 + 1.0);
        let mut coeffs = vec![0.0; self.n_modes];
        for (j, &s) in samples.iter().enumerate() {
            let row = &self.basis[j * self.n_modes..(j + 1) * self.n_modes];
            for (c, b) in coeffs.iter_mut().zip(row) {
                *c += b * s;
            }
        }
        for c in &mut coeffs {
            *c *= weight;
        }
        SpectralField::new(coeffs)
    }
}
