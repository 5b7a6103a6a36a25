//! JSON run configuration and its translation into solver inputs.
//!
//! One document describes one experiment: the equation data (weights,
//! delays, reaction term, forcing), the discretization, tolerances, and
//! the experiment-specific block (horizon, initial history, fit window).
//! Unknown top-level keys are rejected so typos fail loudly instead of
//! silently running a default.

use serde::Deserialize;

use efk_core::{
    default_step, AffineBound, DelaySpec, Discretization, Error, Forcing, HarmonicTerm,
    InitialHistory, Nonlinearity, NonlinearityKind, PeriodicTrajectory, ProblemSpec, Result,
    SpectralField, Tolerances, Trajectory, Waveform,
};

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Fourth-order coefficient of the spatial operator.
    pub gamma: f64,
    /// Period of the forcing (and of the sought periodic solution).
    pub omega: f64,
    /// Delay times of the reaction arguments, one per argument.
    pub delays: Vec<f64>,
    /// Declared Lipschitz weights, overriding the ones the reaction
    /// expression implies. Optional; needed for certificates when the
    /// expression has none of its own.
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    /// Declared growth offset `K` in `|f + g| <= sum beta |xi| + K`.
    #[serde(default, rename = "K")]
    pub k: Option<f64>,
    /// Reaction expression, tagged by `"fn"`.
    pub nonlinearity: NonlinearityKind,
    /// Sum of separable harmonic forcing terms; empty means unforced.
    #[serde(default)]
    pub forcing: Vec<ForcingTermSpec>,
    #[serde(default)]
    pub discretization: DiscretizationSpec,
    #[serde(default)]
    pub tolerances: TolerancesSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    /// Seed for every randomized ingredient (hypothesis sampling,
    /// residual spot-check times). Recorded in all outputs.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// One forcing term `amplitude * wave(2 pi harmonic t / omega + phase)
/// * sin(mode pi x)`. `harmonic = 0` gives time-constant forcing.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTermSpec {
    pub amplitude: f64,
    pub wave: Waveform,
    #[serde(default)]
    pub harmonic: u32,
    #[serde(default)]
    pub phase: f64,
    pub mode: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSpec {
    /// Number of spectral modes (default 64).
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Number of collocation nodes (default 2N).
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Time step (default `min(tau_min/20, omega/200, 1e-3)`).
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesSpec {
    pub picard_tol: f64,
    pub max_iters: usize,
    /// Bar the independent integral-equation residual must clear.
    pub residual_tol: f64,
    /// Relative slack on the fitted decay slope.
    pub slope_slack: f64,
    /// Relative slack on the decay envelope dominance check.
    pub bound_slack: f64,
}

impl Default for TolerancesSpec {
    fn default() -> Self {
        TolerancesSpec {
            picard_tol: 1e-10,
            max_iters: 50,
            residual_tol: 1e-6,
            slope_slack: 0.05,
            bound_slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    /// Forward integration horizon; required by solve-ivp and
    /// verify-stability.
    pub horizon: Option<f64>,
    /// Initial history on `[-r, 0]` (default zero).
    pub history: Option<HistorySpec>,
    /// Log-fit window for decay measurements (default second half of
    /// the run).
    pub fit_window: Option<[f64; 2]>,
}

/// Initial-history descriptions.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistorySpec {
    /// Identically zero history.
    Zero,
    /// The same coefficient vector at every time in `[-r, 0]`; shorter
    /// vectors are zero-padded to the mode count.
    Constant { coeffs: Vec<f64> },
    /// The computed periodic orbit restricted to `[-r, 0]`, plus
    /// `scale` times the given basis mode. `scale = 0` starts exactly on
    /// the orbit.
    PeriodicPlus { scale: f64, mode: usize },
    /// Coefficient rows on a strictly increasing time grid, linearly
    /// interpolated and clamped outside the tabulated range.
    Table {
        times: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
}

impl RunConfig {
    /// Assembles the solver-facing problem description.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let delays = DelaySpec::new(self.delays.clone())?;
        let arity = self.delays.len();
        let mut nonlinearity = Nonlinearity::new(self.nonlinearity.clone(), arity)?;
        if let Some(betas) = &self.betas {
            nonlinearity = nonlinearity.with_declared_betas(betas.clone())?;
        }
        if let Some(k) = self.k {
            if !(k >= 0.0) {
                return Err(Error::Config(format!(
                    "growth offset K must be nonnegative, got {k}"
                )));
            }
            // The offset only forms a usable affine bound together with
            // per-argument weights; without any we keep K for the
            // hypothesis checker alone.
            if let Some(betas) = nonlinearity.lipschitz_betas().map(<[f64]>::to_vec) {
                nonlinearity = nonlinearity.with_affine_bound(AffineBound { betas, offset: k })?;
            }
        }

        let terms = self
            .forcing
            .iter()
            .map(|t| HarmonicTerm {
                amplitude: t.amplitude,
                waveform: t.wave,
                angular_frequency: 2.0 * std::f64::consts::PI * t.harmonic as f64 / self.omega,
                phase: t.phase,
                mode: t.mode,
            })
            .collect::<Vec<_>>();
        let forcing = Forcing::harmonic(terms, Some(self.omega))?;

        let n_modes = self.discretization.n.unwrap_or(64);
        let n_nodes = self.discretization.m.unwrap_or(2 * n_modes);
        let step = self
            .discretization
            .h
            .unwrap_or_else(|| default_step(&delays, self.omega));

        ProblemSpec::new(
            self.gamma,
            self.omega,
            delays,
            nonlinearity,
            forcing,
            Discretization {
                n_modes,
                n_nodes,
                step,
            },
            Tolerances {
                picard_tol: self.tolerances.picard_tol,
                max_iters: self.tolerances.max_iters,
            },
        )
    }

    pub fn history_spec(&self) -> HistorySpec {
        self.experiment.history.clone().unwrap_or(HistorySpec::Zero)
    }

    /// The forward-integration horizon, demanded by the commands that
    /// integrate.
    pub fn required_horizon(&self, command: &str) -> Result<f64> {
        match self.experiment.horizon {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(Error::Config(format!(
                "experiment.horizon must be positive and finite, got {t}"
            ))),
            None => Err(Error::Config(format!(
                "experiment.horizon is required for {command}"
            ))),
        }
    }

    /// Builds the initial history. `orbit` must be supplied for the
    /// `periodic_plus` kind; commands that have no orbit reject it.
    pub fn initial_history(
        &self,
        n_modes: usize,
        orbit: Option<&PeriodicTrajectory>,
        max_delay: f64,
    ) -> Result<InitialHistory> {
        match self.history_spec() {
            HistorySpec::Zero => Ok(InitialHistory::zero(n_modes)),
            HistorySpec::Constant { coeffs } => {
                Ok(InitialHistory::Constant(padded_field(&coeffs, n_modes)?))
            }
            HistorySpec::PeriodicPlus { scale, mode } => {
                let orbit = orbit.ok_or_else(|| {
                    Error::Config(
                        "periodic_plus history needs the periodic orbit; only solve-ivp and \
                         verify-stability compute one"
                            .to_string(),
                    )
                })?;
                let perturbation = perturbation_field(n_modes, scale, mode)?;
                perturbed_orbit_history(orbit, max_delay, &perturbation)
            }
            HistorySpec::Table { times, coeffs } => {
                if times.len() != coeffs.len() || times.len() < 2 {
                    return Err(Error::Config(format!(
                        "history table needs matching times and rows (at least two), got {} and {}",
                        times.len(),
                        coeffs.len()
                    )));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config(
                        "history table times must increase strictly".to_string(),
                    ));
                }
                let rows = coeffs
                    .iter()
                    .map(|row| padded_field(row, n_modes))
                    .collect::<Result<Vec<_>>>()?;
                Ok(InitialHistory::closure(n_modes, move |t| {
                    interp_rows(&times, &rows, t)
                }))
            }
        }
    }

    /// The perturbation the stability experiment applies on top of the
    /// orbit. Only the `periodic_plus` history kind defines one.
    pub fn perturbation(&self, n_modes: usize) -> Result<SpectralField> {
        match self.history_spec() {
            HistorySpec::PeriodicPlus { scale, mode } => perturbation_field(n_modes, scale, mode),
            _ => Err(Error::Config(
                "verify-stability needs experiment.history of kind periodic_plus \
                 (use scale 0 to start exactly on the orbit)"
                    .to_string(),
            )),
        }
    }
}

fn padded_field(coeffs: &[f64], n_modes: usize) -> Result<SpectralField> {
    if coeffs.len() > n_modes {
        return Err(Error::Config(format!(
            "history row has {} coefficients but the discretization carries {n_modes} modes",
            coeffs.len()
        )));
    }
    let mut padded = coeffs.to_vec();
    padded.resize(n_modes, 0.0);
    SpectralField::new(padded)
}

fn perturbation_field(n_modes: usize, scale: f64, mode: usize) -> Result<SpectralField> {
    if !scale.is_finite() {
        return Err(Error::Config(format!(
            "perturbation scale must be finite, got {scale}"
        )));
    }
    if scale == 0.0 {
        return Ok(SpectralField::zeros(n_modes));
    }
    SpectralField::basis(n_modes, mode, scale)
}

/// Orbit tail on `[-r, 0]` with a constant perturbation added to the
/// values (derivative slots untouched).
fn perturbed_orbit_history(
    orbit: &PeriodicTrajectory,
    r: f64,
    perturbation: &SpectralField,
) -> Result<InitialHistory> {
    let segment = orbit.history_segment(r)?;
    let mut knots = Trajectory::new(segment.n_modes());
    for ((&t, v), d) in segment
        .times()
        .iter()
        .zip(segment.values())
        .zip(segment.derivs())
    {
        knots.push(t, v.add_scaled(1.0, perturbation)?, d.clone())?;
    }
    Ok(InitialHistory::Table(knots))
}

fn interp_rows(times: &[f64], rows: &[SpectralField], t: f64) -> SpectralField {
    if t <= times[0] {
        return rows[0].clone();
    }
    if t >= times[times.len() - 1] {
        return rows[rows.len() - 1].clone();
    }
    let j = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[j]) / (times[j + 1] - times[j]);
    let diff = rows[j + 1].sub(&rows[j]).unwrap();
    rows[j].add_scaled(w, &diff).unwrap()
}
