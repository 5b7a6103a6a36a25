//! Stability certificates: hypothesis checks, decay-rate arithmetic,
//! growth envelopes, and the perturbation-decay experiment.
//!
//! The structural hypotheses behind the contraction and attraction
//! results are, with `beta_k >= 0` the Lipschitz weights of the reaction
//! term and `lambda_1` the smallest eigenvalue:
//!
//! * affine growth: `|f(xi) + g(t, x)| <= sum_k beta_k |xi_k| + K`;
//! * spectral gap: `sum_k beta_k < lambda_1`;
//! * Lipschitz: `|f(xi) - f(eta)| <= sum_k beta_k |xi_k - eta_k|`;
//! * delayed spectral gap: `sum_k beta_k e^{lambda_1 tau_k} < lambda_1`.
//!
//! Under the last of these, perturbations of the periodic orbit decay at
//! least like `C e^{-rho t}` with
//! `rho = lambda_1 - sum_k beta_k e^{lambda_1 tau_k} > 0`,
//! and `C` computable from the weighted gap between the perturbed and
//! reference histories. The pointwise inequalities are validated by
//! seeded sampling; the gaps are plain arithmetic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::history::InitialHistory;
use crate::integrator::{solve_ivp, SolverOptions};
use crate::periodic::PeriodicTrajectory;
use crate::problem::ProblemSpec;
use crate::trajectory::Trajectory;

/// Distances below this are roundoff noise and excluded from log-linear
/// fits.
/// Distances below this are treated as zero: the log-fit ignores them and
/// envelope comparisons get it as additive slack.
pub const DISTANCE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Satisfied,
    Violated,
    /// Not decidable from the available data (e.g. no Lipschitz weights
    /// are known for the reaction term).
    Unknown,
}

/// Outcome of one structural condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub status: ConditionStatus,
    /// Signed slack: positive means the condition holds with that much
    /// room, negative quantifies the violation. Absent when unknown or
    /// when the condition is a sampled inequality.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub detail: String,
}

impl ConditionCheck {
    fn unknown(detail: impl Into<String>) -> Self {
        ConditionCheck {
            status: ConditionStatus::Unknown,
            margin: None,
            detail: detail.into(),
        }
    }

    fn from_margin(margin: f64, detail: String) -> Self {
        ConditionCheck {
            status: if margin > 0.0 {
                ConditionStatus::Satisfied
            } else {
                ConditionStatus::Violated
            },
            margin: Some(margin),
            detail,
        }
    }
}

/// Structural hypothesis report for one problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `|f(xi) + g(t,x)| <= sum beta |xi| + K`, sampled.
    pub affine_growth: ConditionCheck,
    /// `sum beta < lambda_1`.
    pub spectral_gap: ConditionCheck,
    /// `|f(xi) - f(eta)| <= sum beta |xi - eta|`, sampled.
    pub lipschitz: ConditionCheck,
    /// `sum beta e^{lambda_1 tau} < lambda_1`.
    pub delayed_spectral_gap: ConditionCheck,
    pub lambda1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_sum: Option<f64>,
    /// `sum beta / lambda_1`, the periodic fixed-point contraction factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_factor: Option<f64>,
    /// `rho = lambda_1 - sum beta e^{lambda_1 tau}`; may be negative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_exponent: Option<f64>,
    /// Affine offset `K` the growth check used (declared plus the
    /// forcing's own sup bound).
    pub growth_offset: f64,
    pub samples: usize,
    pub seed: u64,
}

impl HypothesisReport {
    /// True when every condition is affirmatively satisfied, i.e. the
    /// decay certificate stands on checked ground.
    pub fn certified(&self) -> bool {
        [
            &self.affine_growth,
            &self.spectral_gap,
            &self.lipschitz,
            &self.delayed_spectral_gap,
        ]
        .iter()
        .all(|c| c.status == ConditionStatus::Satisfied)
    }
}

/// Sampling budget for the pointwise checks.
#[derive(Debug, Clone)]
pub struct HypothesisSampling {
    pub samples: usize,
    /// Half-width of the argument box the reaction term is probed on.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for HypothesisSampling {
    fn default() -> Self {
        HypothesisSampling {
            samples: 100_000,
            amplitude: 10.0,
            seed: 0,
        }
    }
}

/// `rho = lambda_1 - sum_k beta_k e^{lambda_1 tau_k}`.
pub fn decay_exponent(lambda1: f64, betas: &[f64], taus: &[f64]) -> Result<f64> {
    if betas.len() != taus.len() {
        return Err(Error::ShapeMismatch {
            expected: taus.len(),
            actual: betas.len(),
        });
    }
    Ok(lambda1
        - betas
            .iter()
            .zip(taus)
            .map(|(&b, &tau)| b * (lambda1 * tau).exp())
            .sum::<f64>())
}

/// Steady-state norm radius `K / (lambda_1 - sum beta)`: every solution
/// is eventually confined to (and every periodic orbit lies in) the ball
/// of this radius, given the affine growth bound and the spectral gap.
pub fn radius_bound(lambda1: f64, beta_sum: f64, offset: f64) -> Result<f64> {
    if !(beta_sum >= 0.0) || !(offset >= 0.0) {
        return Err(Error::domain(
            "weights and offset must be nonnegative".to_string(),
        ));
    }
    if beta_sum >= lambda1 {
        return Err(Error::domain(format!(
            "radius bound needs sum beta ({beta_sum}) below lambda_1 ({lambda1})"
        )));
    }
    Ok(offset / (lambda1 - beta_sum))
}

/// Runs every structural check. `declared_offset` supplies the affine
/// constant `K` for the reaction term alone; when absent, a declared
/// affine bound on the nonlinearity is used, and failing that `K = 0`
/// (exact for odd saturating and linear reaction terms). The forcing's
/// own sup bound is added automatically.
pub fn check_hypotheses(
    problem: &ProblemSpec,
    declared_offset: Option<f64>,
    sampling: &HypothesisSampling,
) -> HypothesisReport {
    let spectrum = problem.spectrum();
    let lambda1 = spectrum.lambda1();
    let nl = &problem.nonlinearity;
    let taus = problem.delays.taus();
    let forcing_sup = problem.forcing.sup_bound();

    let bound_betas: Option<Vec<f64>> = nl
        .affine_bound()
        .map(|b| b.betas.clone())
        .or_else(|| nl.lipschitz_betas().map(|b| b.to_vec()));
    let reaction_offset = declared_offset
        .or_else(|| nl.affine_bound().map(|b| b.offset))
        .unwrap_or(0.0);
    let growth_offset = reaction_offset + forcing_sup;
    let lip_betas = nl.lipschitz_betas().map(|b| b.to_vec());

    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let n_args = problem.delays.len();

    let affine_growth = match &bound_betas {
        None => {
            ConditionCheck::unknown("no Lipschitz weights available; affine growth not checkable")
        }
        Some(betas) => {
            let mut worst = f64::NEG_INFINITY;
            let mut ok = true;
            let mut xi = vec![0.0; n_args];
            for _ in 0..sampling.samples {
                for x in xi.iter_mut() {
                    *x = rng.gen_range(-sampling.amplitude..sampling.amplitude);
                }
                let t = rng.gen_range(0.0..problem.omega);
                let x_pos = rng.gen_range(0.0..1.0);
                let value = (nl.eval(&xi) + problem.forcing.value_at(t, x_pos)).abs();
                let bound: f64 = betas
                    .iter()
                    .zip(&xi)
                    .map(|(&b, &x)| b * x.abs())
                    .sum::<f64>()
                    + growth_offset;
                let slack = bound * (1.0 + 1e-12) + 1e-12 - value;
                worst = worst.max(value - bound);
                if slack < 0.0 {
                    ok = false;
                }
            }
            ConditionCheck {
                status: if ok {
                    ConditionStatus::Satisfied
                } else {
                    ConditionStatus::Violated
                },
                margin: None,
                detail: format!(
                    "sampled |f(xi) + g| - (sum beta |xi| + {growth_offset:.6}) has max {worst:.3e} over {} draws",
                    sampling.samples
                ),
            }
        }
    };

    let (beta_sum, spectral_gap) = match nl.lipschitz_betas() {
        None => (
            None,
            ConditionCheck::unknown("no Lipschitz weights; spectral gap not checkable"),
        ),
        Some(betas) => {
            let s: f64 = betas.iter().sum();
            let margin = lambda1 - s;
            (
                Some(s),
                ConditionCheck::from_margin(
                    margin,
                    format!("sum beta = {s:.6}, lambda_1 = {lambda1:.6}"),
                ),
            )
        }
    };

    let lipschitz = match &lip_betas {
        None => {
            ConditionCheck::unknown("no Lipschitz weights; pointwise Lipschitz bound not checkable")
        }
        Some(betas) => {
            let mut ok = true;
            let mut worst = f64::NEG_INFINITY;
            let mut xi = vec![0.0; n_args];
            let mut eta = vec![0.0; n_args];
            for _ in 0..sampling.samples {
                for (x, e) in xi.iter_mut().zip(eta.iter_mut()) {
                    *x = rng.gen_range(-sampling.amplitude..sampling.amplitude);
                    *e = rng.gen_range(-sampling.amplitude..sampling.amplitude);
                }
                let diff = (nl.eval(&xi) - nl.eval(&eta)).abs();
                let bound: f64 = betas
                    .iter()
                    .zip(xi.iter().zip(&eta))
                    .map(|(&b, (&x, &e))| b * (x - e).abs())
                    .sum();
                worst = worst.max(diff - bound);
                if diff > bound * (1.0 + 1e-12) + 1e-12 {
                    ok = false;
                }
            }
            ConditionCheck {
                status: if ok {
                    ConditionStatus::Satisfied
                } else {
                    ConditionStatus::Violated
                },
                margin: None,
                detail: format!(
                    "sampled |f(xi) - f(eta)| - sum beta |xi - eta| has max {worst:.3e} over {} draws",
                    sampling.samples
                ),
            }
        }
    };

    let (decay, delayed_spectral_gap) = match nl.lipschitz_betas() {
        None => (
            None,
            ConditionCheck::unknown("no Lipschitz weights; delayed spectral gap not checkable"),
        ),
        Some(betas) => {
            let rho = decay_exponent(lambda1, betas, taus)
                .expect("weights and delays have matching arity");
            let weighted: f64 = lambda1 - rho;
            (
                Some(rho),
                ConditionCheck::from_margin(
                    rho,
                    format!(
                        "sum beta e^(lambda_1 tau) = {weighted:.6}, lambda_1 = {lambda1:.6}, decay exponent rho = {rho:.6}"
                    ),
                ),
            )
        }
    };

    HypothesisReport {
        affine_growth,
        spectral_gap,
        lipschitz,
        delayed_spectral_gap,
        lambda1,
        beta_sum,
        contraction_factor: beta_sum.map(|s| s / lambda1),
        decay_exponent: decay,
        growth_offset,
        samples: sampling.samples,
        seed: sampling.seed,
    }
}

/// Exponential envelope `psi_0 e^{(sum b) t}` dominating any nonnegative
/// `psi` with `psi(t) <= psi_0 + sum_k b_k Int_0^t psi(s - tau_k) ds` and
/// `psi = psi_0` before time zero.
pub fn bellman_envelope(psi0: f64, bs: &[f64], t: f64) -> Result<f64> {
    if !(psi0 >= 0.0) || bs.iter().any(|&b| !(b >= 0.0)) {
        return Err(Error::domain(
            "envelope needs nonnegative psi_0 and weights".to_string(),
        ));
    }
    if t < 0.0 {
        return Err(Error::domain(format!(
            "envelope is a forward-time bound, got t = {t}"
        )));
    }
    Ok(psi0 * (bs.iter().sum::<f64>() * t).exp())
}

/// Forward-Euler simulation of the extremal integral relation
/// `psi'(t) = sum_k b_k psi(t - tau_k)`, `psi = psi_0` on `[-max tau, 0]`.
/// Returns `(t, psi(t))` samples on the Euler grid. Deliberately naive;
/// serves as an independent witness that the exponential envelope
/// dominates.
pub fn simulate_delay_recurrence(
    psi0: f64,
    bs: &[f64],
    taus: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    if bs.len() != taus.len() {
        return Err(Error::ShapeMismatch {
            expected: taus.len(),
            actual: bs.len(),
        });
    }
    if taus.iter().any(|&t| !(t > 0.0)) || !(dt > 0.0) || !(horizon > 0.0) || !(psi0 >= 0.0) {
        return Err(Error::domain(
            "delays, step, horizon must be positive and psi_0 nonnegative".to_string(),
        ));
    }
    let n = (horizon / dt).ceil() as usize;
    let mut values = Vec::with_capacity(n + 1);
    values.push(psi0);
    // Linear interpolation on the growing sample list; constant before 0.
    let lookup = |values: &[f64], s: f64| -> f64 {
        if s <= 0.0 {
            return psi0;
        }
        let idx = s / dt;
        let lo = idx.floor() as usize;
        let frac = idx - lo as f64;
        if lo + 1 < values.len() {
            values[lo] * (1.0 - frac) + values[lo + 1] * frac
        } else {
            *values.last().unwrap()
        }
    };
    for m in 0..n {
        let t_m = m as f64 * dt;
        let rate: f64 = bs
            .iter()
            .zip(taus)
            .map(|(&b, &tau)| b * lookup(&values, t_m - tau))
            .sum();
        let next = values[m] + dt * rate;
        values.push(next);
    }
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(m, v)| (m as f64 * dt, v))
        .collect())
}

/// Log-linear fit of the perturbation decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub n_samples: usize,
    /// Fitted d/dt of `log(distance)`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `-rho`, the slope the certificate guarantees at worst.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theoretical_slope: Option<f64>,
    /// `slope <= -rho (1 - slack)` when `rho` is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_within_tolerance: Option<bool>,
    /// The run never left the roundoff floor (the unperturbed case);
    /// there is no decay to fit and the slope fields are placeholders.
    #[serde(default)]
    pub at_floor: bool,
}

impl DecayFit {
    fn floored(window: (f64, f64)) -> Self {
        DecayFit {
            window,
            n_samples: 0,
            slope: 0.0,
            intercept: DISTANCE_FLOOR.ln(),
            r_squared: 1.0,
            theoretical_slope: None,
            slope_within_tolerance: None,
            at_floor: true,
        }
    }
}

/// Everything measured by one perturbation-decay run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractionOutcome {
    /// Knot times of the forward run (nonnegative part).
    pub times: Vec<f64>,
    /// `||u(t) - ubar(t)||_2` at those times.
    pub distances: Vec<f64>,
    pub lambda1: f64,
    /// `rho`; absent without Lipschitz weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_exponent: Option<f64>,
    /// `sup_{s in [-r, 0]} e^{lambda_1 s} ||kappa(s) - ubar(s)||_2`.
    pub prefactor_weighted: f64,
    /// `sup_{s in [-r, 0]} ||kappa(s) - ubar(s)||_2` (always at least the
    /// weighted one; the fallback constant).
    pub prefactor_sup: f64,
    /// Whether `d(t) <= C e^{-rho t} (1 + slack)` held at every knot for
    /// the respective prefactor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_bound_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_bound_holds: Option<bool>,
    pub bound_slack: f64,
    pub fit: DecayFit,
}

impl AttractionOutcome {
    /// Fails with the first measured violation if even the looser
    /// (sup-prefactor) envelope did not dominate the measured distances.
    pub fn enforce_bound(&self) -> Result<()> {
        let (Some(rho), Some(sup_ok)) = (self.decay_exponent, self.sup_bound_holds) else {
            return Ok(());
        };
        if sup_ok {
            return Ok(());
        }
        for (&t, &d) in self.times.iter().zip(&self.distances) {
            let bound = self.prefactor_sup * (-rho * t).exp() * (1.0 + self.bound_slack);
            if d > bound {
                return Err(Error::BoundViolation {
                    t,
                    measured: d,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Knobs for [`attraction_experiment`].
#[derive(Debug, Clone)]
pub struct AttractionSettings {
    pub horizon: f64,
    /// Fit window; defaults to the second half of the run.
    pub fit_window: Option<(f64, f64)>,
    /// Relative slack allowed on the fitted slope.
    pub slope_slack: f64,
    /// Relative slack allowed on the envelope dominance check.
    pub bound_slack: f64,
    pub solver: SolverOptions,
}

impl Default for AttractionSettings {
    fn default() -> Self {
        AttractionSettings {
            horizon: 0.1,
            fit_window: None,
            slope_slack: 0.05,
            bound_slack: 0.05,
            solver: SolverOptions::default(),
        }
    }
}

/// Perturbs the periodic orbit's history segment, runs the delayed
/// problem forward, and measures the decay of the distance to the orbit
/// against the certified envelope.
pub fn attraction_experiment(
    problem: &ProblemSpec,
    orbit: &PeriodicTrajectory,
    perturbation: &SpectralField,
    settings: &AttractionSettings,
) -> Result<AttractionOutcome> {
    let spectrum = problem.spectrum();
    let lambda1 = spectrum.lambda1();
    let r = problem.delays.max_delay();

    // kappa = ubar + perturbation on [-r, 0], keeping the orbit's
    // derivative slots (the perturbation is constant in time).
    let segment = orbit.history_segment(r)?;
    let mut kappa = Trajectory::new(segment.n_modes());
    let mut prefactor_weighted = 0.0f64;
    let mut prefactor_sup = 0.0f64;
    for ((&t, v), d) in segment
        .times()
        .iter()
        .zip(segment.values())
        .zip(segment.derivs())
    {
        let shifted = v.add_scaled(1.0, perturbation)?;
        let gap = perturbation.norm_l2();
        prefactor_sup = prefactor_sup.max(gap);
        prefactor_weighted = prefactor_weighted.max((lambda1 * t.min(0.0)).exp() * gap);
        kappa.push(t, shifted, d.clone())?;
    }
    let history = InitialHistory::Table(kappa);
    let run = solve_ivp(problem, &history, settings.horizon, &settings.solver)?;

    let mut times = Vec::new();
    let mut distances = Vec::new();
    for (&t, v) in run.times().iter().zip(run.values()) {
        if t < 0.0 {
            continue;
        }
        let reference = orbit.eval(t)?;
        times.push(t);
        distances.push(v.sub(&reference)?.norm_l2());
    }

    let rho = problem
        .beta_sum()
        .map(|_| {
            decay_exponent(
                lambda1,
                problem.nonlinearity.lipschitz_betas().unwrap(),
                problem.delays.taus(),
            )
        })
        .transpose()?;

    // The orbit is only known up to the iteration tolerance, so distances
    // below that resolution are indistinguishable from zero.
    let resolution = DISTANCE_FLOOR.max(10.0 * problem.tolerances.picard_tol);
    let bound_holds = |prefactor: f64| -> Option<bool> {
        rho.map(|rho| {
            times.iter().zip(&distances).all(|(&t, &d)| {
                d <= prefactor * (-rho * t).exp() * (1.0 + settings.bound_slack) + resolution
            })
        })
    };
    let weighted_bound_holds = bound_holds(prefactor_weighted);
    let sup_bound_holds = bound_holds(prefactor_sup);

    let window = settings
        .fit_window
        .unwrap_or((settings.horizon / 2.0, settings.horizon));
    let fit = if distances.iter().all(|&d| d < resolution) {
        // Starting on the orbit itself leaves nothing to fit: report the
        // floor instead of failing.
        DecayFit::floored(window)
    } else {
        fit_decay(&times, &distances, window, rho, settings.slope_slack)?
    };

    Ok(AttractionOutcome {
        times,
        distances,
        lambda1,
        decay_exponent: rho,
        prefactor_weighted,
        prefactor_sup,
        weighted_bound_holds,
        sup_bound_holds,
        bound_slack: settings.bound_slack,
        fit,
    })
}

/// Least-squares line through `(t, log d)` over the window, ignoring
/// samples at roundoff level.
pub fn fit_decay(
    times: &[f64],
    distances: &[f64],
    window: (f64, f64),
    rho: Option<f64>,
    slope_slack: f64,
) -> Result<DecayFit> {
    if !(window.0 < window.1) {
        return Err(Error::domain(format!(
            "fit window must be increasing, got ({}, {})",
            window.0, window.1
        )));
    }
    let pairs: Vec<(f64, f64)> = times
        .iter()
        .zip(distances)
        .filter(|(&t, &d)| t >= window.0 && t <= window.1 && d >= DISTANCE_FLOOR)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::domain(format!(
            "decay fit needs at least two usable samples in the window, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_t = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(t, y) in &pairs {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::domain(
            "decay fit window collapses to a single time".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = pairs
        .iter()
        .map(|&(t, y)| {
            let p = intercept + slope * t;
            (y - p) * (y - p)
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        window,
        n_samples: pairs.len(),
        slope,
        intercept,
        r_squared,
        theoretical_slope: rho.map(|r| -r),
        slope_within_tolerance: rho.map(|r| slope <= -r * (1.0 - slope_slack)),
        at_floor: false,
    })
}
