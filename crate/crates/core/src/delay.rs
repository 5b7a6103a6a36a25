//! Delay structure of the reaction term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The positive delays `tau_1, ..., tau_n`. Order matters: the k-th delay
/// feeds the k-th argument of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    taus: Vec<f64>,
}

impl DelaySpec {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::config("need at least one delay"));
        }
        if taus.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::domain(format!(
                "delays must be positive and finite, got {taus:?}"
            )));
        }
        Ok(DelaySpec { taus })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one delay
    }

    /// `r = max_k tau_k`, the length of history every solve must carry.
    pub fn max_delay(&self) -> f64 {
        self.taus.iter().fold(0.0, |m, t| m.max(*t))
    }

    /// Smallest delay; the step-size heuristic resolves it.
    pub fn min_delay(&self) -> f64 {
        self.taus.iter().fold(f64::INFINITY, |m, t| m.min(*t))
    }
}
