//! Green's-kernel route for solving `A u = phi`.
//!
//! Through the factorization `A = gamma (-D^2 + mu_1)(-D^2 + mu_2)` the
//! solve splits into two second-order two-point problems with Dirichlet
//! data, each with an explicit kernel:
//!
//! * `mu_1 > 0` gives the hyperbolic kernel, for `x <= y`
//!   `G_1(x, y) = sinh(a x) sinh(a (1-y)) / (a sinh a)`, `a = sqrt(mu_1)`;
//! * `-pi^2 < mu_2 < 0` gives the trigonometric kernel, for `x <= y`
//!   `G_2(x, y) = sin(nu x) sin(nu (1-y)) / (nu sin nu)`, `nu = sqrt(-mu_2)`,
//!   well defined because `0 < nu < pi` keeps `sin nu` away from zero.
//!
//! Both kernels are symmetric, vanish on the boundary, and have a slope
//! kink across the diagonal, so quadrature panels are always split there.
//! The composed solution is
//!
//! ```text
//! u(x) = (1/gamma) Int Int G_1(x, y) G_2(y, z) phi(z) dz dy,
//! ```
//!
//! evaluated as two nested 1-D passes (never a triple loop): first
//! `v(y) = Int G_2(y, z) phi(z) dz` at every outer quadrature node with
//! the z-interval split at `z = y`, then `u(x_j)` for every collocation
//! node with the y-panels aligned so each `x_j` is a panel boundary.
//! Projecting the node values back to the sine basis gives a field that
//! must agree with the coefficientwise solve `a_k / lambda_k`; that
//! agreement is the standing cross-check between the two routes.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::operator::factorization_roots;
use crate::quad::GaussLegendre;
use crate::transform::SineTransform;

/// The two factor kernels for a given `gamma`.
#[derive(Debug, Clone)]
pub struct GreensKernelPair {
    mu1: f64,
    mu2: f64,
    /// sqrt(mu_1), decay rate of the hyperbolic kernel.
    a: f64,
    /// sqrt(-mu_2), frequency of the trigonometric kernel.
    nu: f64,
}

impl GreensKernelPair {
    pub fn new(gamma: f64) -> Result<Self> {
        let (mu1, mu2) = factorization_roots(gamma)?;
        Ok(GreensKernelPair {
            mu1,
            mu2,
            a: mu1.sqrt(),
            nu: (-mu2).sqrt(),
        })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    /// Hyperbolic kernel of `(-D^2 + mu_1)` with Dirichlet ends.
    ///
    /// Evaluated in an exponential-difference form that never feeds large
    /// arguments to `sinh`, so it stays finite for any `gamma > 0`.
    pub fn g1(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let a = self.a;
        let em = |t: f64| -(-t).exp_m1(); // 1 - exp(-t), accurate near 0
        (-a * (hi - lo)).exp() * em(2.0 * a * lo) * em(2.0 * a * (1.0 - hi))
            / (2.0 * a * em(2.0 * a))
    }

    /// Trigonometric kernel of `(-D^2 + mu_2)` with Dirichlet ends.
    pub fn g2(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let nu = self.nu;
        (nu * lo).sin() * (nu * (1.0 - hi)).sin() / (nu * nu.sin())
    }
}

/// Solves `A u = phi` by the layered kernel quadrature and projects the
/// result onto the sine basis carried by `transform`.
///
/// `nodes_per_axis` controls both quadrature directions; it must be at
/// least `4 (M + 1)` so every collocation-aligned panel keeps a few
/// Gauss points.
pub fn greens_solve(
    gamma: f64,
    phi: impl Fn(f64) -> f64,
    transform: &SineTransform,
    nodes_per_axis: usize,
) -> Result<SpectralField> {
    let pair = GreensKernelPair::new(gamma)?;
    solve_with_kernels(
        gamma,
        |y, z| pair.g2(y, z),
        |x, y| pair.g1(x, y),
        phi,
        transform,
        nodes_per_axis,
    )
}

/// Quadrature engine behind [`greens_solve`], parameterized over the two
/// kernels. Exposed so diagnostics (the self-test fault injection in
/// particular) can substitute a deliberately wrong kernel and confirm the
/// coefficientwise cross-check catches it.
pub fn solve_with_kernels(
    gamma: f64,
    inner_kernel: impl Fn(f64, f64) -> f64,
    outer_kernel: impl Fn(f64, f64) -> f64,
    phi: impl Fn(f64) -> f64,
    transform: &SineTransform,
    nodes_per_axis: usize,
) -> Result<SpectralField> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "fourth-order coefficient must be positive and finite, got {gamma}"
        )));
    }
    let n_panels = transform.n_nodes() + 1;
    let min_nodes = 4 * n_panels;
    if nodes_per_axis < min_nodes {
        return Err(Error::config(format!(
            "quadrature resolution {} below minimum {} for {} collocation nodes",
            nodes_per_axis,
            min_nodes,
            transform.n_nodes()
        )));
    }

    // Outer grid: one panel between consecutive collocation nodes, so the
    // outer kernel's diagonal kink always sits on a panel boundary.
    let per_panel = nodes_per_axis.div_ceil(n_panels);
    let panel_rule = GaussLegendre::new(per_panel);
    let mut ys: Vec<f64> = Vec::with_capacity(per_panel * n_panels);
    let mut yw: Vec<f64> = Vec::with_capacity(per_panel * n_panels);
    for j in 0..n_panels {
        let a = j as f64 / n_panels as f64;
        let b = (j + 1) as f64 / n_panels as f64;
        panel_rule.extend_mapped(a, b, &mut ys, &mut yw);
    }

    // Pass 1: v(y) = Int kernel(y, z) phi(z) dz, split at the kink z = y.
    let half_rule = GaussLegendre::new(nodes_per_axis.div_ceil(2));
    let v: Vec<f64> = ys
        .iter()
        .map(|&y| {
            half_rule.integrate(0.0, y, |z| inner_kernel(y, z) * phi(z))
                + half_rule.integrate(y, 1.0, |z| inner_kernel(y, z) * phi(z))
        })
        .collect();

    // Pass 2: u(x_j) = (1/gamma) Int kernel(x_j, y) v(y) dy on the shared
    // y-grid.
    let inv_gamma = 1.0 / gamma;
    let samples: Vec<f64> = transform
        .nodes()
        .iter()
        .map(|&x| {
            let integral: f64 = ys
                .iter()
                .zip(&yw)
                .zip(&v)
                .map(|((&y, &w), &vy)| w * outer_kernel(x, y) * vy)
                .sum();
            inv_gamma * integral
        })
        .collect();

    transform.to_spectral(&samples)
}
