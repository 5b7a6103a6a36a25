//! Time-periodic solutions by Picard iteration on the period map.
//!
//! For the linear-in-`u` sweep `a' = -lambda a + phi(t)` with
//! `omega`-periodic `phi`, the unique periodic solution has initial value
//!
//! ```text
//! a(0) = (1 - e^{-lambda omega})^{-1} Int_0^omega e^{-lambda (omega-s)} phi(s) ds
//! ```
//!
//! mode by mode. Discretely, the integral is accumulated with exactly the
//! stepper's trapezoidal-exponential weights, so the subsequent sweep from
//! `a(0)` lands back on `a(0)` up to roundoff: the discrete orbit is a true
//! fixed point of the discrete period map, not merely near one.
//!
//! The nonlinear problem is solved by iterating `u <- F(u)`, where `F(v)`
//! is the periodic solution of the linear problem with frozen reaction data
//! `f(v(t - tau_1), ..., v(t - tau_n)) + g(t)`. When the reaction term has
//! Lipschitz weights `beta_k` with `sum beta_k < lambda_1`, `F` contracts
//! in the sup norm with factor at most `sum beta_k / lambda_1`, which is
//! what the convergence certificate checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::forcing::Waveform;
use crate::integrator::{DelayedRhs, EtdWeights};
use crate::operator::OperatorSpectrum;
use crate::problem::ProblemSpec;
use crate::trajectory::Trajectory;

/// Residuals below this are considered roundoff noise and excluded from
/// the empirical contraction estimate.
const RESIDUAL_FLOOR: f64 = 1e-14;

/// An `omega`-periodic orbit stored as knots on a uniform grid over one
/// period, evaluable at any real time through periodic wrapping.
#[derive(Debug, Clone)]
pub struct PeriodicTrajectory {
    knots: Trajectory,
    omega: f64,
}

impl PeriodicTrajectory {
    /// Wraps a knot record covering exactly `[0, omega]`.
    pub fn new(knots: Trajectory, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::domain(format!(
                "period must be positive, got {omega}"
            )));
        }
        if knots.len() < 2 {
            return Err(Error::domain(
                "a periodic orbit needs at least two knots".to_string(),
            ));
        }
        let first = knots.first_time().unwrap();
        let last = knots.last_time().unwrap();
        if first.abs() > 1e-12 * omega || (last - omega).abs() > 1e-12 * omega {
            return Err(Error::domain(format!(
                "periodic knots must cover [0, {omega}], got [{first}, {last}]"
            )));
        }
        Ok(PeriodicTrajectory { knots, omega })
    }

    /// The all-zero orbit on a uniform grid with `n_steps` intervals;
    /// the standard starting iterate.
    pub fn zeros(n_modes: usize, omega: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::domain("n_steps must be positive".to_string()));
        }
        let mut knots = Trajectory::new(n_modes);
        for j in 0..=n_steps {
            let t = if j == n_steps {
                omega
            } else {
                j as f64 * omega / n_steps as f64
            };
            knots.push(
                t,
                SpectralField::zeros(n_modes),
                SpectralField::zeros(n_modes),
            )?;
        }
        PeriodicTrajectory::new(knots, omega)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n_modes(&self) -> usize {
        self.knots.n_modes()
    }

    /// The knot record over one period.
    pub fn knots(&self) -> &Trajectory {
        &self.knots
    }

    /// Evaluates the periodic extension at any time.
    pub fn eval(&self, t: f64) -> Result<SpectralField> {
        let mut s = t.rem_euclid(self.omega);
        // rem_euclid can round up to the modulus for tiny negative inputs.
        if s >= self.omega {
            s = 0.0;
        }
        self.knots.interpolate(s)
    }

    /// Largest knotwise `L^2` distance to another orbit on the same grid.
    pub fn max_distance(&self, other: &PeriodicTrajectory) -> Result<f64> {
        if self.knots.len() != other.knots.len() {
            return Err(Error::ShapeMismatch {
                expected: self.knots.len(),
                actual: other.knots.len(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.knots.values().iter().zip(other.knots.values()) {
            worst = worst.max(a.sub(b)?.norm_l2());
        }
        Ok(worst)
    }

    /// Largest `L^2` norm over the knots.
    pub fn max_norm(&self) -> f64 {
        self.knots
            .values()
            .iter()
            .map(SpectralField::norm_l2)
            .fold(0.0, f64::max)
    }

    /// The knots shifted to `[-r, 0]` (reading the tail of the period),
    /// suitable as an initial history for a forward run. Requires
    /// `r <= omega`. The first returned knot sits at or before `-r`.
    pub fn history_segment(&self, r: f64) -> Result<Trajectory> {
        if !(r > 0.0) || r > self.omega {
            return Err(Error::domain(format!(
                "history span must lie in (0, {}], got {r}",
                self.omega
            )));
        }
        let n = self.knots.len();
        let step = self.knots.times()[1] - self.knots.times()[0];
        // Number of backward steps covering r; nudge up if the product
        // rounded below r so the segment reaches -r in exact arithmetic.
        let mut back = ((r / step).ceil() as usize).min(n - 1);
        while (back as f64) * step < r && back < n - 1 {
            back += 1;
        }
        let mut out = Trajectory::new(self.n_modes());
        for k in (0..=back).rev() {
            let j = n - 1 - k;
            // Relabel onto the exact backward grid -k * step: the knots'
            // own times carry rounding from the j * step products, and a
            // forward run queries exactly t - tau at its left edge.
            let shifted = if k == 0 { 0.0 } else { -(k as f64) * step };
            out.push(
                shifted,
                self.knots.values()[j].clone(),
                self.knots.derivs()[j].clone(),
            )?;
        }
        Ok(out)
    }
}

/// What happened during the fixed-point iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Number of sweeps whose update was at or above the tolerance; the
    /// final sweep that lands below it is not counted.
    pub iterations: usize,
    /// Knot-sup update size after each sweep, in order.
    pub residuals: Vec<f64>,
    /// The stopping threshold the residuals were compared against.
    pub tolerance: f64,
    /// `sum beta_k / lambda_1` when Lipschitz weights are known.
    pub theoretical_factor: Option<f64>,
    /// Geometric mean of successive residual ratios, ignoring residuals
    /// at roundoff level; absent when fewer than two usable residuals.
    pub empirical_factor: Option<f64>,
    pub converged: bool,
}

impl std::fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} after {} iterations, last residual {:.3e}",
            if self.converged {
                "converged"
            } else {
                "stalled"
            },
            self.iterations,
            self.residuals.last().copied().unwrap_or(0.0)
        )
    }
}

/// Periodic initial value of the linear sweep from reaction knots `phis`
/// on the uniform grid `(phis.len() - 1)` steps across `[0, omega]`.
pub fn periodic_initial_value(
    spectrum: &OperatorSpectrum,
    weights: &EtdWeights,
    phis: &[SpectralField],
    omega: f64,
) -> Result<SpectralField> {
    if phis.len() < 2 {
        return Err(Error::domain(
            "need reaction values at both period endpoints".to_string(),
        ));
    }
    let n_steps = phis.len() - 1;
    let step_span = n_steps as f64 * weights.step();
    if (step_span - omega).abs() > 1e-9 * omega {
        return Err(Error::domain(format!(
            "grid covers {step_span}, period is {omega}"
        )));
    }
    let n_modes = spectrum.n_modes();
    let mut integral = SpectralField::zeros(n_modes);
    for j in 0..n_steps {
        integral = weights.advance_integral(&integral, &phis[j], &phis[j + 1]);
    }
    // a(0) = I / (1 - e^{-lambda omega}), denominator via expm1 so small
    // exponents keep full precision.
    Ok(integral.map_modes(|k, ik| {
        let lambda = spectrum.eigenvalues()[k - 1];
        ik / (-(-lambda * omega).exp_m1())
    }))
}

/// Reaction knots `f(previous delayed) + g` on the periodic grid.
fn reaction_knots(
    problem: &ProblemSpec,
    previous: &PeriodicTrajectory,
    n_steps: usize,
    step: f64,
) -> Result<Vec<SpectralField>> {
    let transform = problem.transform();
    let rhs = DelayedRhs {
        transform: &transform,
        delays: &problem.delays,
        nonlinearity: &problem.nonlinearity,
        forcing: &problem.forcing,
    };
    let omega = problem.omega;
    (0..=n_steps)
        .map(|j| {
            let t = if j == n_steps { omega } else { j as f64 * step };
            rhs.eval(t, |s| previous.eval(s))
        })
        .collect()
}

/// One application of the period map: freezes the reaction data on the
/// previous iterate, solves the resulting linear periodic problem with
/// the exponential sweep, and returns the new orbit.
pub fn apply_periodic_map(
    problem: &ProblemSpec,
    spectrum: &OperatorSpectrum,
    weights: &EtdWeights,
    previous: &PeriodicTrajectory,
) -> Result<PeriodicTrajectory> {
    let n_steps = previous.knots().len() - 1;
    let step = weights.step();
    let omega = problem.omega;
    let phis = reaction_knots(problem, previous, n_steps, step)?;
    let u0 = periodic_initial_value(spectrum, weights, &phis, omega)?;

    let mut knots = Trajectory::new(spectrum.n_modes());
    let mut a = u0;
    for j in 0..=n_steps {
        let t = if j == n_steps { omega } else { j as f64 * step };
        let d = a.map_modes(|k, ak| phis[j].coeffs()[k - 1] - spectrum.eigenvalues()[k - 1] * ak);
        knots.push(t, a.clone(), d)?;
        if j < n_steps {
            a = weights.advance_integral(&a, &phis[j], &phis[j + 1]);
        }
    }
    PeriodicTrajectory::new(knots, omega)
}

/// Controls for [`find_periodic`].
#[derive(Debug, Clone, Default)]
pub struct PicardOptions {
    /// Refuse to iterate unless the contraction hypothesis
    /// `sum beta_k < lambda_1` is verifiable from declared or intrinsic
    /// Lipschitz weights.
    pub require_certificate: bool,
}

/// Solves for the periodic orbit by fixed-point iteration, returning the
/// orbit and a convergence report. Fails with the report attached when
/// the iteration exhausts its budget above tolerance.
pub fn find_periodic(
    problem: &ProblemSpec,
    options: &PicardOptions,
) -> Result<(PeriodicTrajectory, ConvergenceReport)> {
    let spectrum = problem.spectrum();
    let lambda1 = spectrum.lambda1();
    let theoretical_factor = problem.beta_sum().map(|s| s / lambda1);

    if options.require_certificate {
        match problem.beta_sum() {
            None => {
                return Err(Error::CertificateRefused(
                    "no Lipschitz weights are available for the reaction term".to_string(),
                ))
            }
            Some(s) if s >= lambda1 => {
                return Err(Error::CertificateRefused(format!(
                    "Lipschitz weight sum {s} is not below the smallest eigenvalue {lambda1}"
                )))
            }
            Some(_) => {}
        }
    }

    let omega = problem.omega;
    let h = problem.discretization.step;
    let n_steps = ((omega / h - 1e-9).ceil() as usize).max(1);
    let step = omega / n_steps as f64;
    let weights = EtdWeights::new(&spectrum, step)?;

    let tol = problem.tolerances.picard_tol;
    let max_iters = problem.tolerances.max_iters;
    let mut current = PeriodicTrajectory::zeros(problem.discretization.n_modes, omega, n_steps)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let next = apply_periodic_map(problem, &spectrum, &weights, &current)?;
        let residual = next.max_distance(&current)?;
        residuals.push(residual);
        current = next;
        if residual < tol {
            converged = true;
            break;
        }
    }

    let iterations = residuals.iter().filter(|&&r| r >= tol).count();
    let ratios: Vec<f64> = residuals
        .windows(2)
        .filter(|w| w[0] >= RESIDUAL_FLOOR && w[1] >= RESIDUAL_FLOOR)
        .map(|w| w[1] / w[0])
        .collect();
    let empirical_factor = if ratios.is_empty() {
        None
    } else {
        Some((ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp())
    };
    let report = ConvergenceReport {
        iterations,
        residuals,
        tolerance: tol,
        theoretical_factor,
        empirical_factor,
        converged,
    };
    if !converged {
        return Err(Error::ConvergenceFailure {
            report: Box::new(report),
        });
    }
    Ok((current, report))
}

/// Closed-form periodic orbit for the purely linear case: zero reaction
/// term and separable harmonic forcing. Returns `None` when the problem
/// is not of that shape. Each forcing term `c trig(Omega t + theta)` on
/// mode `j` contributes, with `q = c / sqrt(2)` and `L = lambda_j`,
///
/// ```text
/// cos: q (L cos + Omega sin)(Omega t + theta) / (L^2 + Omega^2)
/// sin: q (L sin - Omega cos)(Omega t + theta) / (L^2 + Omega^2)
/// ```
pub fn linear_periodic_solution(
    problem: &ProblemSpec,
    n_steps: usize,
) -> Result<Option<PeriodicTrajectory>> {
    if !problem.nonlinearity.is_zero() || !problem.forcing.is_separable() {
        return Ok(None);
    }
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be positive".to_string()));
    }
    let spectrum = problem.spectrum();
    let n_modes = problem.discretization.n_modes;
    let omega = problem.omega;
    let value_at = |t: f64| -> Result<(SpectralField, SpectralField)> {
        let mut a = vec![0.0; n_modes];
        for term in problem.forcing.terms() {
            let j = term.mode;
            if j > n_modes {
                continue;
            }
            let lambda = spectrum.eigenvalue(j)?;
            let q = term.amplitude / 2.0f64.sqrt();
            let big_omega = term.angular_frequency;
            let arg = big_omega * t + term.phase;
            let denom = lambda * lambda + big_omega * big_omega;
            a[j - 1] += match term.waveform {
                Waveform::Cos => q * (lambda * arg.cos() + big_omega * arg.sin()) / denom,
                Waveform::Sin => q * (lambda * arg.sin() - big_omega * arg.cos()) / denom,
            };
        }
        let value = SpectralField::new(a)?;
        let phi = problem.forcing.spectral_at(t, n_modes);
        let deriv =
            value.map_modes(|k, ak| phi.coeffs()[k - 1] - spectrum.eigenvalues()[k - 1] * ak);
        Ok((value, deriv))
    };
    let mut knots = Trajectory::new(n_modes);
    for j in 0..=n_steps {
        let t = if j == n_steps {
            omega
        } else {
            j as f64 * omega / n_steps as f64
        };
        let (v, d) = value_at(t)?;
        knots.push(t, v, d)?;
    }
    Ok(Some(PeriodicTrajectory::new(knots, omega)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelaySpec;
    use crate::forcing::Forcing;
    use crate::nonlinearity::{Nonlinearity, NonlinearityKind};
    use crate::problem::{Discretization, Tolerances};
    use approx::assert_relative_eq;

    fn problem(
        nl: Nonlinearity,
        forcing: Forcing,
        delays: Vec<f64>,
        n_modes: usize,
        step: f64,
    ) -> ProblemSpec {
        ProblemSpec::new(
            1.0,
            1.0,
            DelaySpec::new(delays).unwrap(),
            nl,
            forcing,
            Discretization {
                n_modes,
                n_nodes: 2 * n_modes,
                step,
            },
            Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_reaction_initial_value_is_quotient_by_eigenvalue() {
        // phi == c e_1 gives a(0) = c / lambda_1 exactly: the weighted
        // integral recurrence is exact for constants.
        let spectrum = OperatorSpectrum::new(1.0, 4).unwrap();
        let weights = EtdWeights::new(&spectrum, 0.01).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let phis = vec![SpectralField::basis(4, 1, c).unwrap(); 101];
        let u0 = periodic_initial_value(&spectrum, &weights, &phis, 1.0).unwrap();
        assert_relative_eq!(
            u0.coeff(1).unwrap(),
            c / spectrum.lambda1(),
            max_relative = 1e-12
        );
        assert_relative_eq!(u0.coeff(1).unwrap(), 0.0066533, max_relative = 1e-4);
    }

    #[test]
    fn zero_problem_converges_in_zero_iterations() {
        let p = problem(Nonlinearity::zero(1), Forcing::none(), vec![0.1], 4, 1e-2);
        let (orbit, report) = find_periodic(&p, &PicardOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.converged);
        assert!(orbit.max_norm() < 1e-15);
        assert!(report.empirical_factor.is_none());
    }

    #[test]
    fn pure_forcing_converges_in_one_iteration() {
        let p = problem(
            Nonlinearity::zero(1),
            Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap(),
            vec![0.1],
            4,
            1e-2,
        );
        let (_, report) = find_periodic(&p, &PicardOptions::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn sweep_returns_to_its_initial_value() {
        let nl = Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 }, 1).unwrap();
        let p = problem(
            nl,
            Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap(),
            vec![0.05],
            8,
            1e-3,
        );
        let (orbit, _) = find_periodic(&p, &PicardOptions::default()).unwrap();
        let first = orbit.knots().values().first().unwrap();
        let last = orbit.knots().values().last().unwrap();
        assert!(
            last.sub(first).unwrap().norm_l2() <= 1e-11 * orbit.max_norm().max(1.0),
            "periodicity defect {}",
            last.sub(first).unwrap().norm_l2()
        );
    }

    #[test]
    fn closed_form_matches_iterated_solution_for_cos_forcing() {
        let forcing = Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap();
        let p = problem(Nonlinearity::zero(1), forcing, vec![0.01], 8, 1e-3);
        let (orbit, _) = find_periodic(&p, &PicardOptions::default()).unwrap();
        let exact = linear_periodic_solution(&p, 1000).unwrap().unwrap();
        let diff = orbit.max_distance(&exact).unwrap();
        // Step-size error of the linear-in-phi model at h = 1e-3 is about
        // (Omega h)^2 / 12 relative to the 6.6e-3 amplitude.
        assert!(diff < 5e-8, "closed form vs sweep differ by {diff}");
    }

    #[test]
    fn closed_form_amplitude_matches_frequency_response() {
        // Mode 1, cos(2 pi t): amplitude c/sqrt(2) / sqrt(lambda_1^2 + Omega^2),
        // and the mean-square coefficient over the period matches it.
        let forcing = Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap();
        let p = problem(Nonlinearity::zero(1), forcing, vec![0.01], 4, 1e-3);
        let exact = linear_periodic_solution(&p, 2000).unwrap().unwrap();
        let lambda1 = p.spectrum().lambda1();
        let big_omega = 2.0 * std::f64::consts::PI;
        let amp = (1.0 / 2.0f64.sqrt()) / (lambda1 * lambda1 + big_omega * big_omega).sqrt();
        let peak = exact
            .knots()
            .values()
            .iter()
            .map(|v| v.coeff(1).unwrap().abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(peak, amp, max_relative = 1e-5);
        assert_relative_eq!(amp, 0.0066417, max_relative = 1e-4);
    }

    #[test]
    fn wrap_evaluation_is_periodic() {
        let forcing = Forcing::single_harmonic(1.0, Waveform::Sin, 1, 0.3, 1, 1.0).unwrap();
        let p = problem(Nonlinearity::zero(1), forcing, vec![0.01], 4, 1e-3);
        let orbit = linear_periodic_solution(&p, 100).unwrap().unwrap();
        for &t in &[0.0, 0.25, 0.4937, 0.999, 1.0] {
            let base = orbit.eval(t).unwrap();
            for shift in [-2.0, -1.0, 1.0, 3.0] {
                let moved = orbit.eval(t + shift).unwrap();
                assert!(
                    moved.sub(&base).unwrap().norm_l2() < 1e-12,
                    "wrap mismatch at t={t}, shift={shift}"
                );
            }
        }
    }

    #[test]
    fn certificate_refused_without_lipschitz_weights() {
        let nl = Nonlinearity::new(NonlinearityKind::Cubic { arg: 1 }, 1).unwrap();
        let p = problem(nl, Forcing::none(), vec![0.1], 4, 1e-2);
        let err = find_periodic(
            &p,
            &PicardOptions {
                require_certificate: true,
            },
        );
        assert!(matches!(err, Err(Error::CertificateRefused(_))), "{err:?}");
    }

    #[test]
    fn certificate_refused_when_weights_dominate_spectrum() {
        let nl = Nonlinearity::new(
            NonlinearityKind::TanhScaled {
                beta: 200.0,
                arg: 1,
            },
            1,
        )
        .unwrap();
        let p = problem(nl, Forcing::none(), vec![0.1], 4, 1e-2);
        let err = find_periodic(
            &p,
            &PicardOptions {
                require_certificate: true,
            },
        );
        assert!(matches!(err, Err(Error::CertificateRefused(_))), "{err:?}");
    }

    #[test]
    fn contraction_rate_respects_theoretical_factor() {
        let nl = Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 }, 1).unwrap();
        let p = problem(
            nl,
            Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap(),
            vec![0.05],
            8,
            1e-3,
        );
        let (_, report) = find_periodic(
            &p,
            &PicardOptions {
                require_certificate: true,
            },
        )
        .unwrap();
        let theo = report.theoretical_factor.unwrap();
        assert_relative_eq!(theo, 10.0 / p.spectrum().lambda1(), max_relative = 1e-14);
        let emp = report.empirical_factor.unwrap();
        assert!(
            emp <= theo + 0.05,
            "empirical factor {emp} exceeds theoretical {theo} by more than 0.05"
        );
        assert!(report.iterations <= 15, "{} iterations", report.iterations);
    }

    #[test]
    fn history_segment_covers_requested_span() {
        let forcing = Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap();
        let p = problem(Nonlinearity::zero(1), forcing, vec![0.01], 4, 1e-3);
        let orbit = linear_periodic_solution(&p, 100).unwrap().unwrap();
        let seg = orbit.history_segment(0.25).unwrap();
        assert!(seg.first_time().unwrap() <= -0.25 + 1e-9);
        assert_relative_eq!(seg.last_time().unwrap(), 0.0, epsilon = 1e-12);
        // Values at the shifted knots agree with the wrap evaluation.
        let mid = seg.interpolate(-0.13).unwrap();
        let direct = orbit.eval(-0.13).unwrap();
        assert!(mid.sub(&direct).unwrap().norm_l2() < 1e-12);
    }
}
