//! The four experiment commands.
//!
//! Each takes a parsed configuration plus the raw bytes it came from
//! (for the provenance stamp), writes its artifacts into `out_dir`, and
//! returns a process exit code:
//!
//! * `0` success;
//! * `1` internal failure (guard tripped, I/O problem);
//! * `2` a certificate or measured-bound failure;
//! * `3` divergence or iteration-budget exhaustion;
//! * `64` configuration error.

use std::path::Path;

use efk_core::{
    attraction_experiment, check_hypotheses, decay_exponent, find_periodic, mild_residual,
    solve_ivp, AttractionSettings, ConditionStatus, Error, HypothesisSampling, PicardOptions,
    Result, SolverOptions, DISTANCE_FLOOR,
};

use crate::config::RunConfig;
use crate::output::{self, Stamp, TrajectoryRow};

/// Maps an error to the exit code contract above.
pub fn code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 64,
        Error::CertificateRefused(_) | Error::BoundViolation { .. } => 2,
        Error::ConvergenceFailure { .. } | Error::Divergence { .. } => 3,
        _ => 1,
    }
}

fn fail(context: &str, err: &Error) -> i32 {
    eprintln!("{context}: {err}");
    code_for(err)
}

/// Builds the problem, reclassifying value rejections: a domain error
/// raised while assembling from file data is a configuration error.
fn build_problem(cfg: &RunConfig) -> Result<efk_core::ProblemSpec> {
    cfg.problem().map_err(|e| match e {
        Error::Domain(msg) => Error::Config(msg),
        other => other,
    })
}

pub fn check(cfg: &RunConfig, raw: &[u8], out_dir: &Path, certificate: bool) -> i32 {
    let problem = match build_problem(cfg) {
        Ok(p) => p,
        Err(e) => return fail("check", &e),
    };
    let sampling = HypothesisSampling {
        seed: cfg.seed,
        ..HypothesisSampling::default()
    };
    let report = check_hypotheses(&problem, cfg.k, &sampling);
    let stamp = Stamp::new(raw, cfg.seed);
    if let Err(e) = output::write_json(&out_dir.join("hypothesis_report.json"), &stamp, &report) {
        return fail("check", &e);
    }

    let conditions = [
        ("affine growth", &report.affine_growth),
        ("spectral gap", &report.spectral_gap),
        ("lipschitz", &report.lipschitz),
        ("delayed spectral gap", &report.delayed_spectral_gap),
    ];
    for (name, cond) in &conditions {
        let margin = cond
            .margin
            .map(|m| format!(" (margin {m:.6})"))
            .unwrap_or_default();
        println!("check: {name}: {:?}{margin}", cond.status);
    }
    if let Some(rho) = report.decay_exponent {
        println!("check: decay exponent rho = {rho}");
    }

    let violated = conditions
        .iter()
        .any(|(_, c)| c.status == ConditionStatus::Violated);
    let unknown = conditions
        .iter()
        .any(|(_, c)| c.status == ConditionStatus::Unknown);
    if violated {
        eprintln!("check: at least one condition is violated");
        return 2;
    }
    if certificate && !report.certified() {
        eprintln!("check: certificate requested but some conditions are undecidable");
        return 2;
    }
    if unknown {
        eprintln!("check: warning: some conditions are undecidable from the given data");
    }
    0
}

pub fn find_periodic_cmd(cfg: &RunConfig, raw: &[u8], out_dir: &Path, certificate: bool) -> i32 {
    let problem = match build_problem(cfg) {
        Ok(p) => p,
        Err(e) => return fail("find-periodic", &e),
    };
    let stamp = Stamp::new(raw, cfg.seed);
    let options = PicardOptions {
        require_certificate: certificate,
    };
    match find_periodic(&problem, &options) {
        Ok((orbit, report)) => {
            let rows: Vec<TrajectoryRow<'_>> = orbit
                .knots()
                .times()
                .iter()
                .zip(orbit.knots().values())
                .map(|(&t, field)| TrajectoryRow {
                    t,
                    field,
                    residual: None,
                })
                .collect();
            let written = output::write_trajectory_csv(
                &out_dir.join("periodic_trajectory.csv"),
                &stamp,
                orbit.n_modes(),
                &rows,
                false,
            )
            .and_then(|()| output::write_json(&out_dir.join("convergence.json"), &stamp, &report));
            if let Err(e) = written {
                return fail("find-periodic", &e);
            }
            println!("find-periodic: {report}");
            0
        }
        Err(Error::ConvergenceFailure { report }) => {
            // Keep the partial report on disk for diagnosis.
            let _ = output::write_json(&out_dir.join("convergence.json"), &stamp, &*report);
            eprintln!("find-periodic: no convergence: {report}");
            3
        }
        Err(e) => fail("find-periodic", &e),
    }
}

pub struct SolveFlags {
    pub residual_check: bool,
    pub stride: usize,
}

pub fn solve_ivp_cmd(
    cfg: &RunConfig,
    raw: &[u8],
    out_dir: &Path,
    certificate: bool,
    flags: &SolveFlags,
) -> i32 {
    let problem = match build_problem(cfg) {
        Ok(p) => p,
        Err(e) => return fail("solve-ivp", &e),
    };
    let horizon = match cfg.required_horizon("solve-ivp") {
        Ok(t) => t,
        Err(e) => return fail("solve-ivp", &e),
    };
    if certificate {
        let sampling = HypothesisSampling {
            seed: cfg.seed,
            ..HypothesisSampling::default()
        };
        if !check_hypotheses(&problem, cfg.k, &sampling).certified() {
            eprintln!("solve-ivp: certificate requested but the hypotheses do not all hold");
            return 2;
        }
    }

    // The periodic_plus history needs the orbit before the run starts.
    let needs_orbit = matches!(
        cfg.history_spec(),
        crate::config::HistorySpec::PeriodicPlus { .. }
    );
    let orbit = if needs_orbit {
        match find_periodic(&problem, &PicardOptions::default()) {
            Ok((orbit, _)) => Some(orbit),
            Err(e) => return fail("solve-ivp", &e),
        }
    } else {
        None
    };
    let kappa = match cfg.initial_history(
        problem.discretization.n_modes,
        orbit.as_ref(),
        problem.delays.max_delay(),
    ) {
        Ok(k) => k,
        Err(e) => return fail("solve-ivp", &e),
    };

    let run = match solve_ivp(&problem, &kappa, horizon, &SolverOptions::default()) {
        Ok(run) => run,
        Err(e) => return fail("solve-ivp", &e),
    };

    // Strided forward knots (the t >= 0 part), always keeping the final one.
    let stride = flags.stride.max(1);
    let forward: Vec<usize> = run
        .times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut selected: Vec<usize> = forward.iter().copied().step_by(stride).collect();
    if let Some(&last) = forward.last() {
        if selected.last() != Some(&last) {
            selected.push(last);
        }
    }

    let residuals: Option<Vec<f64>> = if flags.residual_check {
        let times: Vec<f64> = selected
            .iter()
            .map(|&j| run.times()[j])
            .filter(|&t| t > 0.0)
            .collect();
        match mild_residual(&problem, &run, &times) {
            Ok(values) => {
                let mut per_row = Vec::with_capacity(selected.len());
                let mut it = values.iter();
                for &j in &selected {
                    if run.times()[j] > 0.0 {
                        per_row.push(*it.next().expect("one residual per positive time"));
                    } else {
                        // At t = 0 the integral identity is trivial.
                        per_row.push(0.0);
                    }
                }
                Some(per_row)
            }
            Err(e) => return fail("solve-ivp", &e),
        }
    } else {
        None
    };

    let rows: Vec<TrajectoryRow<'_>> = selected
        .iter()
        .enumerate()
        .map(|(row_idx, &j)| TrajectoryRow {
            t: run.times()[j],
            field: &run.values()[j],
            residual: residuals.as_ref().map(|r| r[row_idx]),
        })
        .collect();

    let stamp = Stamp::new(raw, cfg.seed);
    let written = output::write_trajectory_csv(
        &out_dir.join("trajectory.csv"),
        &stamp,
        problem.discretization.n_modes,
        &rows,
        flags.residual_check,
    )
    .and_then(|()| {
        output::write_trajectory_jsonl(&out_dir.join("trajectory.jsonl"), &stamp, &rows)
    });
    if let Err(e) = written {
        return fail("solve-ivp", &e);
    }

    let final_norm = rows.last().map(|r| r.field.norm_l2()).unwrap_or(0.0);
    println!(
        "solve-ivp: {} knots written, final norm {final_norm:e}",
        rows.len()
    );
    if let Some(res) = &residuals {
        let worst = res.iter().cloned().fold(0.0f64, f64::max);
        println!("solve-ivp: max integral-equation residual {worst:e}");
        if worst > cfg.tolerances.residual_tol {
            eprintln!(
                "solve-ivp: residual {worst:e} exceeds tolerance {:e}",
                cfg.tolerances.residual_tol
            );
            return 1;
        }
    }
    0
}

pub fn verify_stability(cfg: &RunConfig, raw: &[u8], out_dir: &Path, certificate: bool) -> i32 {
    let problem = match build_problem(cfg) {
        Ok(p) => p,
        Err(e) => return fail("verify-stability", &e),
    };
    let horizon = match cfg.required_horizon("verify-stability") {
        Ok(t) => t,
        Err(e) => return fail("verify-stability", &e),
    };
    let perturbation = match cfg.perturbation(problem.discretization.n_modes) {
        Ok(p) => p,
        Err(e) => return fail("verify-stability", &e),
    };

    if certificate {
        let gate = certificate_gate(&problem);
        if let Err(e) = gate {
            return fail("verify-stability", &e);
        }
    }

    let (orbit, _) = match find_periodic(
        &problem,
        &PicardOptions {
            require_certificate: certificate,
        },
    ) {
        Ok(pair) => pair,
        Err(e) => return fail("verify-stability", &e),
    };

    let settings = AttractionSettings {
        horizon,
        fit_window: cfg.experiment.fit_window.map(|[a, b]| (a, b)),
        slope_slack: cfg.tolerances.slope_slack,
        bound_slack: cfg.tolerances.bound_slack,
        solver: SolverOptions::default(),
    };
    let outcome = match attraction_experiment(&problem, &orbit, &perturbation, &settings) {
        Ok(o) => o,
        Err(e) => return fail("verify-stability", &e),
    };

    let stamp = Stamp::new(raw, cfg.seed);
    let resolution = DISTANCE_FLOOR.max(10.0 * problem.tolerances.picard_tol);
    let envelope = |t: f64| -> f64 {
        match outcome.decay_exponent {
            Some(rho) => {
                outcome.prefactor_weighted * (-rho * t).exp() * (1.0 + outcome.bound_slack)
                    + resolution
            }
            None => f64::NAN,
        }
    };
    let written =
        output::write_json(&out_dir.join("decay_fit.json"), &stamp, &outcome).and_then(|()| {
            output::write_decay_csv(
                &out_dir.join("decay_samples.csv"),
                &stamp,
                &outcome.times,
                &outcome.distances,
                envelope,
            )
        });
    if let Err(e) = written {
        return fail("verify-stability", &e);
    }

    if let Err(e) = outcome.enforce_bound() {
        return fail("verify-stability", &e);
    }
    if outcome.fit.at_floor {
        println!("verify-stability: distance stayed at the orbit resolution floor; nothing to fit");
        return 0;
    }
    println!(
        "verify-stability: fitted slope {} over window ({}, {}), r^2 = {}",
        outcome.fit.slope, outcome.fit.window.0, outcome.fit.window.1, outcome.fit.r_squared
    );
    if let Some(rho) = outcome.decay_exponent {
        println!("verify-stability: certified exponent rho = {rho}");
    }
    if outcome.fit.slope_within_tolerance == Some(false) {
        eprintln!(
            "verify-stability: fitted slope {} misses the certified rate {:?}",
            outcome.fit.slope, outcome.fit.theoretical_slope
        );
        return 2;
    }
    if outcome.weighted_bound_holds == Some(false) {
        // The strict (weighted-prefactor) envelope failed but the sup
        // fallback held; report it without failing the run.
        eprintln!(
            "verify-stability: warning: weighted-prefactor envelope exceeded; \
             the sup-prefactor envelope still dominates"
        );
    }
    0
}

/// The decay certificate needs declared (or intrinsic) Lipschitz weights
/// and a positive delay-weighted gap.
fn certificate_gate(problem: &efk_core::ProblemSpec) -> Result<()> {
    let betas = problem
        .nonlinearity
        .lipschitz_betas()
        .ok_or_else(|| {
            Error::CertificateRefused(
                "no Lipschitz weights are declared or implied by the reaction term".to_string(),
            )
        })?
        .to_vec();
    let lambda1 = problem.spectrum().lambda1();
    let rho = decay_exponent(lambda1, &betas, problem.delays.taus())?;
    if rho <= 0.0 {
        return Err(Error::CertificateRefused(format!(
            "delay-weighted gap is not positive: rho = {rho}"
        )));
    }
    Ok(())
}
