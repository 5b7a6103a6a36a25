//! The delayed reaction term `f(u(t - tau_1), ..., u(t - tau_n))`.
//!
//! `f: R^n -> R` acts pointwise in space on the delayed state samples.
//! The expressible family is deliberately small: linear combinations,
//! saturating `beta * tanh` and `beta * sin` couplings, a cubic term, and
//! sums of those. Arbitrary expressions are out of scope; anything beyond
//! this family should be composed from it or implemented as a new kind.
//!
//! Two optional pieces of analysis data ride along:
//!
//! * `lipschitz_betas`: constants `beta_k` with
//!   `|f(xi) - f(eta)| <= sum_k beta_k |xi_k - eta_k|` (global Lipschitz
//!   data; the contraction and decay certificates consume these);
//! * `affine_bound`: constants `(beta_k', K)` with
//!   `|f(xi) + g| <= sum_k beta_k' |xi_k| + K` (linear-growth data behind
//!   the a-priori radius bound).
//!
//! Declared constants are data, not trusted facts: the hypothesis checker
//! validates them by randomized sampling and reports confidence, and a
//! kind with no honest global constant (the cubic) simply leaves them
//! unset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expression tree for `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `f = 0` (the linear problem).
    Zero,
    /// `f(xi) = sum_k coeffs[k] * xi_k`.
    Linear { coeffs: Vec<f64> },
    /// `f(xi) = beta * tanh(xi_arg)`; 1-based `arg`.
    TanhScaled { beta: f64, arg: usize },
    /// `f(xi) = beta * sin(xi_arg)`; 1-based `arg`.
    SinScaled { beta: f64, arg: usize },
    /// `f(xi) = xi_arg^3`; 1-based `arg`. Only locally Lipschitz.
    Cubic { arg: usize },
    /// Sum of sub-expressions.
    Sum { terms: Vec<NonlinearityKind> },
}

impl NonlinearityKind {
    fn eval(&self, args: &[f64]) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Linear { coeffs } => {
                coeffs.iter().zip(args).map(|(c, x)| c * x).sum()
            }
            NonlinearityKind::TanhScaled { beta, arg } => beta * args[arg - 1].tanh(),
            NonlinearityKind::SinScaled { beta, arg } => beta * args[arg - 1].sin(),
            NonlinearityKind::Cubic { arg } => args[arg - 1].powi(3),
            NonlinearityKind::Sum { terms } => terms.iter().map(|t| t.eval(args)).sum(),
        }
    }

    fn validate(&self, arity: usize) -> Result<()> {
        match self {
            NonlinearityKind::Zero => Ok(()),
            NonlinearityKind::Linear { coeffs } => {
                if coeffs.len() != arity {
                    return Err(Error::config(format!(
                        "linear term has {} coefficients for {} delayed arguments",
                        coeffs.len(),
                        arity
                    )));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("linear coefficients must be finite"));
                }
                Ok(())
            }
            NonlinearityKind::TanhScaled { beta, arg }
            | NonlinearityKind::SinScaled { beta, arg } => {
                if *arg == 0 || *arg > arity {
                    return Err(Error::config(format!(
                        "argument index {arg} out of range 1..={arity}"
                    )));
                }
                if !beta.is_finite() {
                    return Err(Error::config("scale must be finite"));
                }
                Ok(())
            }
            NonlinearityKind::Cubic { arg } => {
                if *arg == 0 || *arg > arity {
                    return Err(Error::config(format!(
                        "argument index {arg} out of range 1..={arity}"
                    )));
                }
                Ok(())
            }
            NonlinearityKind::Sum { terms } => {
                for t in terms {
                    t.validate(arity)?;
                }
                Ok(())
            }
        }
    }

    /// Lipschitz constants implied by the expression itself, when every
    /// piece has one (`None` as soon as a cubic appears).
    fn intrinsic_betas(&self, arity: usize) -> Option<Vec<f64>> {
        match self {
            NonlinearityKind::Zero => Some(vec![0.0; arity]),
            NonlinearityKind::Linear { coeffs } => Some(coeffs.iter().map(|c| c.abs()).collect()),
            NonlinearityKind::TanhScaled { beta, arg }
            | NonlinearityKind::SinScaled { beta, arg } => {
                let mut betas = vec![0.0; arity];
                betas[arg - 1] = beta.abs();
                Some(betas)
            }
            NonlinearityKind::Cubic { .. } => None,
            NonlinearityKind::Sum { terms } => {
                let mut betas = vec![0.0; arity];
                for t in terms {
                    let tb = t.intrinsic_betas(arity)?;
                    for (b, x) in betas.iter_mut().zip(tb) {
                        *b += x;
                    }
                }
                Some(betas)
            }
        }
    }
}

/// Linear-growth data: `|f(xi) + g| <= sum_k betas[k] |xi_k| + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBound {
    pub betas: Vec<f64>,
    pub offset: f64,
}

/// The reaction term together with its declared analysis constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    arity: usize,
    kind: NonlinearityKind,
    lipschitz_betas: Option<Vec<f64>>,
    affine_bound: Option<AffineBound>,
}

impl Nonlinearity {
    /// Builds the term and fills the Lipschitz constants the expression
    /// itself implies (none for cubic pieces).
    pub fn new(kind: NonlinearityKind, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::config("need at least one delayed argument"));
        }
        kind.validate(arity)?;
        let lipschitz_betas = kind.intrinsic_betas(arity);
        Ok(Nonlinearity {
            arity,
            kind,
            lipschitz_betas,
            affine_bound: None,
        })
    }

    /// `f = 0` with the given arity.
    pub fn zero(arity: usize) -> Self {
        Nonlinearity::new(NonlinearityKind::Zero, arity).expect("arity checked by callers")
    }

    /// Overrides the Lipschitz constants with externally declared ones.
    pub fn with_declared_betas(mut self, betas: Vec<f64>) -> Result<Self> {
        if betas.len() != self.arity {
            return Err(Error::config(format!(
                "{} Lipschitz constants for {} delayed arguments",
                betas.len(),
                self.arity
            )));
        }
        if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::config("Lipschitz constants must be finite and >= 0"));
        }
        self.lipschitz_betas = Some(betas);
        Ok(self)
    }

    /// Attaches linear-growth data `(betas, K)`.
    pub fn with_affine_bound(mut self, bound: AffineBound) -> Result<Self> {
        if bound.betas.len() != self.arity {
            return Err(Error::config(format!(
                "{} growth constants for {} delayed arguments",
                bound.betas.len(),
                self.arity
            )));
        }
        if bound.betas.iter().any(|b| !b.is_finite() || *b < 0.0)
            || !bound.offset.is_finite()
            || bound.offset < 0.0
        {
            return Err(Error::config("growth constants must be finite and >= 0"));
        }
        self.affine_bound = Some(bound);
        Ok(self)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    pub fn lipschitz_betas(&self) -> Option<&[f64]> {
        self.lipschitz_betas.as_deref()
    }

    pub fn affine_bound(&self) -> Option<&AffineBound> {
        self.affine_bound.as_ref()
    }

    /// Evaluates `f` on one tuple of delayed samples. The slice length
    /// must equal the arity.
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.arity);
        self.kind.eval(args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtins_evaluate_as_written() {
        let lin = Nonlinearity::new(
            NonlinearityKind::Linear {
                coeffs: vec![2.0, -1.0],
            },
            2,
        )
        .unwrap();
        assert_relative_eq!(lin.eval(&[3.0, 4.0]), 2.0);

        let tanh =
            Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 }, 1).unwrap();
        assert_relative_eq!(tanh.eval(&[0.5]), 10.0 * 0.5f64.tanh());

        let cubic = Nonlinearity::new(NonlinearityKind::Cubic { arg: 1 }, 1).unwrap();
        assert_relative_eq!(cubic.eval(&[-2.0]), -8.0);

        let sum = Nonlinearity::new(
            NonlinearityKind::Sum {
                terms: vec![
                    NonlinearityKind::SinScaled { beta: 3.0, arg: 2 },
                    NonlinearityKind::Linear {
                        coeffs: vec![1.0, 0.0],
                    },
                ],
            },
            2,
        )
        .unwrap();
        assert_relative_eq!(sum.eval(&[1.0, 0.25]), 3.0 * 0.25f64.sin() + 1.0);
    }

    #[test]
    fn intrinsic_betas_follow_the_expression() {
        let tanh = Nonlinearity::new(
            NonlinearityKind::TanhScaled {
                beta: -10.0,
                arg: 1,
            },
            2,
        )
        .unwrap();
        assert_eq!(tanh.lipschitz_betas(), Some(&[10.0, 0.0][..]));

        let sum = Nonlinearity::new(
            NonlinearityKind::Sum {
                terms: vec![
                    NonlinearityKind::TanhScaled { beta: 4.0, arg: 1 },
                    NonlinearityKind::SinScaled { beta: 2.0, arg: 1 },
                ],
            },
            1,
        )
        .unwrap();
        assert_eq!(sum.lipschitz_betas(), Some(&[6.0][..]));

        let cubic = Nonlinearity::new(NonlinearityKind::Cubic { arg: 1 }, 1).unwrap();
        assert_eq!(cubic.lipschitz_betas(), None);
    }

    #[test]
    fn arity_violations_are_configuration_errors() {
        assert!(Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 1.0, arg: 3 }, 2).is_err());
        assert!(Nonlinearity::new(NonlinearityKind::Linear { coeffs: vec![1.0] }, 2).is_err());
        assert!(Nonlinearity::new(NonlinearityKind::Zero, 0).is_err());
        let f = Nonlinearity::zero(2);
        assert!(f.clone().with_declared_betas(vec![1.0]).is_err());
        assert!(f.with_declared_betas(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn json_round_trip_of_expression_tree() {
        let kind = NonlinearityKind::Sum {
            terms: vec![
                NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 },
                NonlinearityKind::Cubic { arg: 2 },
            ],
        };
        let json = serde_json::to_string(&kind).unwrap();
        let back: NonlinearityKind = serde_json::from_str(&json).unwrap();
        assert_eq!(kind, back);
        assert!(json.contains("\"fn\":\"tanh_scaled\""));
    }
}
