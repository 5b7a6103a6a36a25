//! Complete description of one delayed reaction-diffusion problem.
//!
//! Bundles the operator coefficient, the period, the delays, the reaction
//! term, the forcing, the discretization sizes, and the iteration
//! tolerances. Everything downstream (initial-value solves, periodic
//! orbits, stability experiments) consumes this one struct, so validation
//! happens here exactly once.

use serde::{Deserialize, Serialize};

use crate::delay::DelaySpec;
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::nonlinearity::Nonlinearity;
use crate::operator::OperatorSpectrum;
use crate::transform::SineTransform;

/// Spectral resolution and step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Number of sine modes carried.
    pub n_modes: usize,
    /// Number of collocation nodes for pointwise nonlinearity evaluation.
    /// Twice the mode count is the usual dealiasing choice.
    pub n_nodes: usize,
    /// Time step of the exponential stepper.
    pub step: f64,
}

impl Discretization {
    /// Defaults: 64 modes, 128 nodes, with the step chosen by
    /// [`default_step`] from delays and period.
    pub fn with_default_step(
        n_modes: usize,
        n_nodes: usize,
        delays: &DelaySpec,
        omega: f64,
    ) -> Self {
        Discretization {
            n_modes,
            n_nodes,
            step: default_step(delays, omega),
        }
    }
}

/// `min(tau_min / 20, omega / 200, 1e-3)`: resolve the shortest delay,
/// resolve the period, and never step coarser than a millisecond of
/// simulated time.
pub fn default_step(delays: &DelaySpec, omega: f64) -> f64 {
    (delays.min_delay() / 20.0).min(omega / 200.0).min(1e-3)
}

/// Stopping rules for the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Sup-over-grid L2 residual below which the iteration stops.
    pub picard_tol: f64,
    /// Iteration budget before a convergence failure is raised.
    pub max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            picard_tol: 1e-10,
            max_iters: 50,
        }
    }
}

/// One problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub gamma: f64,
    /// Period of the forcing and of the sought orbit.
    pub omega: f64,
    pub delays: DelaySpec,
    pub nonlinearity: Nonlinearity,
    pub forcing: Forcing,
    pub discretization: Discretization,
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    /// Validates cross-field consistency and returns the description.
    pub fn new(
        gamma: f64,
        omega: f64,
        delays: DelaySpec,
        nonlinearity: Nonlinearity,
        forcing: Forcing,
        discretization: Discretization,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!(
                "fourth-order coefficient must be positive and finite, got {gamma}"
            )));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::domain(format!(
                "period must be positive, got {omega}"
            )));
        }
        if nonlinearity.arity() != delays.len() {
            return Err(Error::config(format!(
                "nonlinearity takes {} arguments but {} delays are declared",
                nonlinearity.arity(),
                delays.len()
            )));
        }
        if let Some(period) = forcing.period() {
            if (period - omega).abs() > 1e-12 * omega.max(1.0) {
                return Err(Error::config(format!(
                    "forcing period {period} disagrees with problem period {omega}"
                )));
            }
        }
        if discretization.n_modes == 0 {
            return Err(Error::config("need at least one mode"));
        }
        if discretization.n_nodes < discretization.n_modes {
            return Err(Error::config(format!(
                "collocation grid too coarse: {} nodes for {} modes",
                discretization.n_nodes, discretization.n_modes
            )));
        }
        if !(discretization.step > 0.0) || !discretization.step.is_finite() {
            return Err(Error::config(format!(
                "step must be positive, got {}",
                discretization.step
            )));
        }
        if !(tolerances.picard_tol > 0.0) || tolerances.max_iters == 0 {
            return Err(Error::config(
                "picard tolerance must be positive and the iteration budget non-zero",
            ));
        }
        Ok(ProblemSpec {
            gamma,
            omega,
            delays,
            nonlinearity,
            forcing,
            discretization,
            tolerances,
        })
    }

    pub fn spectrum(&self) -> OperatorSpectrum {
        OperatorSpectrum::new(self.gamma, self.discretization.n_modes)
            .expect("validated in ProblemSpec::new")
    }

    pub fn transform(&self) -> SineTransform {
        SineTransform::new(self.discretization.n_modes, self.discretization.n_nodes)
            .expect("validated in ProblemSpec::new")
    }

    /// Sum of declared Lipschitz constants, if declared.
    pub fn beta_sum(&self) -> Option<f64> {
        self.nonlinearity.lipschitz_betas().map(|b| b.iter().sum())
    }
}
