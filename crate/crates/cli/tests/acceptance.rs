//! Whole-system acceptance runs. Each test exercises one advertised
//! guarantee end to end, asserts it at its stated tolerance, and prints
//! a single `[ACCEPT] criterion N PASS` line with the measured numbers
//! (visible under `cargo test --test acceptance -- --nocapture`).

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use approx::assert_relative_eq;
use efk_core::{
    attraction_experiment, bellman_envelope, check_hypotheses, decay_exponent, find_periodic,
    greens_solve, mild_residual, radius_bound, residual_check_times, simulate_delay_recurrence,
    solve_ivp, AttractionSettings, ConditionStatus, DelaySpec, Discretization, Forcing,
    HypothesisSampling, InitialHistory, Nonlinearity, NonlinearityKind, OperatorSpectrum,
    PicardOptions, ProblemSpec, SineTransform, SolverOptions, SpectralField, Tolerances, Waveform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn problem(
    gamma: f64,
    delays: Vec<f64>,
    nonlinearity: Nonlinearity,
    forcing: Forcing,
    n_modes: usize,
    step: f64,
) -> ProblemSpec {
    ProblemSpec::new(
        gamma,
        1.0,
        DelaySpec::new(delays).unwrap(),
        nonlinearity,
        forcing,
        Discretization {
            n_modes,
            n_nodes: 2 * n_modes,
            step,
        },
        Tolerances {
            picard_tol: 1e-10,
            max_iters: 25,
        },
    )
    .unwrap()
}

fn tanh_term(beta: f64) -> Nonlinearity {
    Nonlinearity::new(NonlinearityKind::TanhScaled { beta, arg: 1 }, 1).unwrap()
}

/// Unit cosine drive on the first basis mode, period 1.
fn cosine_mode1() -> Forcing {
    Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap()
}

/// Steady response of `a' = -lambda a + q cos(W t)`.
fn cosine_response(lambda: f64, q: f64, w: f64, t: f64) -> f64 {
    q * (lambda * (w * t).cos() + w * (w * t).sin()) / (lambda * lambda + w * w)
}

fn mode1_field(n_modes: usize, value: f64) -> SpectralField {
    let mut coeffs = vec![0.0; n_modes];
    coeffs[0] = value;
    SpectralField::new(coeffs).unwrap()
}

type SourceShape = (&'static str, fn(f64) -> f64);

#[test]
fn criterion_01_layered_quadrature_matches_the_modal_inverse() {
    let start = Instant::now();
    let transform = SineTransform::new(128, 256).unwrap();
    let shapes: [SourceShape; 3] = [
        ("sin(pi x)", |x| (PI * x).sin()),
        ("sin(2 pi x)", |x| (2.0 * PI * x).sin()),
        ("x(1-x)", |x| x * (1.0 - x)),
    ];
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    for gamma in [0.5, 1.0, 2.0] {
        let spectrum = OperatorSpectrum::new(gamma, 128).unwrap();
        for (label, phi) in shapes {
            let numeric = greens_solve(gamma, phi, &transform, 2048).unwrap();
            let samples: Vec<f64> = transform.nodes().iter().map(|&x| phi(x)).collect();
            let projected = transform.to_spectral(&samples).unwrap();
            let reference = spectrum.solve(&projected).unwrap();
            let err = numeric.sub(&reference).unwrap().norm_l2() / reference.norm_l2();
            assert!(
                err <= 1e-8,
                "gamma = {gamma}, phi = {label}: relative error {err:.3e} above 1e-8"
            );
            if err > worst {
                worst = err;
                worst_label = format!("gamma = {gamma}, {label}");
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 10.0,
        "nine inversions took {elapsed:.1} s (limit 10 s)"
    );
    println!(
        "[ACCEPT] criterion 1 PASS: nine quadrature-vs-modal inversions agree, \
         worst rel L2 error {worst:.2e} ({worst_label}), {elapsed:.2} s"
    );
}

#[test]
fn criterion_02_flow_never_beats_the_slowest_decay_rate() {
    let start = Instant::now();
    let n_modes = 64;
    let spectrum = OperatorSpectrum::new(1.0, n_modes).unwrap();
    let lambda1 = spectrum.lambda1();
    let times = [0.001, 0.01, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0usize;
    for _ in 0..100 {
        let u =
            SpectralField::new((0..n_modes).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let norm = u.norm_l2();
        for &t in &times {
            let decayed = spectrum.apply_semigroup(t, &u).unwrap().norm_l2();
            let cap = (-lambda1 * t).exp() * norm;
            assert!(decayed <= cap, "t = {t}: {decayed} exceeds {cap}");
            checks += 1;
        }
    }
    // With only the slowest mode populated the cap is attained.
    let u = mode1_field(n_modes, 0.75);
    for &t in &times {
        let decayed = spectrum.apply_semigroup(t, &u).unwrap().norm_l2();
        let cap = (-lambda1 * t).exp() * u.norm_l2();
        assert_relative_eq!(decayed, cap, max_relative = 1e-12);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "decay sweep took {elapsed:.2} s (limit 1 s)");
    println!(
        "[ACCEPT] criterion 2 PASS: {checks} random decay checks with zero violations, \
         slowest-mode equality within 1e-12, {elapsed:.3} s"
    );
}

#[test]
fn criterion_03_forced_mode_orbit_matches_the_closed_form() {
    let start = Instant::now();
    let p = problem(
        1.0,
        vec![0.1],
        Nonlinearity::zero(1),
        cosine_mode1(),
        8,
        5e-4,
    );
    let (orbit, report) = find_periodic(&p, &PicardOptions::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 1, "a linear sweep settles immediately");

    let lambda1 = p.spectrum().lambda1();
    let q = 1.0 / 2.0f64.sqrt();
    let w = 2.0 * PI;
    let mut sup_err = 0.0f64;
    let mut amplitude = 0.0f64;
    for (&t, v) in orbit.knots().times().iter().zip(orbit.knots().values()) {
        let exact = cosine_response(lambda1, q, w, t);
        sup_err = sup_err.max((v.coeffs()[0] - exact).abs());
        amplitude = amplitude.max(v.coeffs()[0].abs());
        for &c in &v.coeffs()[1..] {
            assert!(c.abs() < 1e-13, "unforced mode picked up mass: {c:e}");
        }
    }
    let peak = q / (lambda1 * lambda1 + w * w).sqrt();
    let rel = sup_err / peak;
    assert!(rel <= 1e-6, "relative sup error {rel:.3e} above 1e-6");
    assert_relative_eq!(amplitude, peak, max_relative = 3e-6);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 30.0,
        "orbit solve took {elapsed:.1} s (limit 30 s)"
    );
    println!(
        "[ACCEPT] criterion 3 PASS: rel sup error {rel:.2e}, amplitude {amplitude:.7} \
         vs closed form {peak:.7}, {elapsed:.2} s"
    );
}

#[test]
fn criterion_04_fixed_point_sweeps_contract_within_budget() {
    let start = Instant::now();
    let mut p = problem(1.0, vec![0.05], tanh_term(10.0), cosine_mode1(), 8, 1e-3);
    p.tolerances = Tolerances {
        picard_tol: 1e-10,
        max_iters: 15,
    };
    let options = PicardOptions {
        require_certificate: true,
    };
    let (_, report) = find_periodic(&p, &options).unwrap();
    assert!(report.converged);
    assert!(
        report.iterations <= 15,
        "needed {} sweeps to reach 1e-10",
        report.iterations
    );
    let last = *report.residuals.last().unwrap();
    assert!(last < 1e-10, "final update {last:e} still above tolerance");
    let budget = 10.0 / p.spectrum().lambda1() + 0.05;
    let factor = report.empirical_factor.unwrap();
    assert!(
        factor <= budget,
        "measured contraction {factor:.4} above budget {budget:.4}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 120.0,
        "iteration took {elapsed:.1} s (limit 120 s)"
    );
    println!(
        "[ACCEPT] criterion 4 PASS: contraction factor {factor:.4} <= {budget:.4}, \
         converged to {last:.1e} in {} sweeps, {elapsed:.2} s",
        report.iterations
    );
}

#[test]
fn criterion_05_halving_the_step_quarters_the_error() {
    let start = Instant::now();
    let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&h| {
            let p = problem(1.0, vec![0.1], Nonlinearity::zero(1), cosine_mode1(), 4, h);
            let traj =
                solve_ivp(&p, &InitialHistory::zero(4), 0.5, &SolverOptions::default()).unwrap();
            let lambda1 = p.spectrum().lambda1();
            let q = 1.0 / 2.0f64.sqrt();
            let w = 2.0 * PI;
            let offset = cosine_response(lambda1, q, w, 0.0);
            // Compare at knot times shared by every run, past the
            // start-up transient.
            (100..=500)
                .map(|k| {
                    let t = k as f64 * 1e-3;
                    let exact = cosine_response(lambda1, q, w, t) - offset * (-lambda1 * t).exp();
                    (traj.interpolate(t).unwrap().coeffs()[0] - exact).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    for (i, r) in ratios.iter().enumerate() {
        assert!(
            (3.4..=4.6).contains(r),
            "halving ratio {r:.2} at level {i} outside [3.4, 4.6]; errors {errors:?}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 60.0,
        "order study took {elapsed:.1} s (limit 60 s)"
    );
    println!(
        "[ACCEPT] criterion 5 PASS: global errors {:.2e} / {:.2e} / {:.2e} give halving \
         ratios {:.2} and {:.2} in [3.4, 4.6], {elapsed:.2} s",
        errors[0], errors[1], errors[2], ratios[0], ratios[1]
    );
}

#[test]
fn criterion_06_integral_form_residuals_stay_small() {
    let start = Instant::now();
    let p = problem(1.0, vec![0.02], tanh_term(1.0), cosine_mode1(), 8, 5e-4);
    let horizon = 0.3;
    let traj = solve_ivp(
        &p,
        &InitialHistory::zero(8),
        horizon,
        &SolverOptions::default(),
    )
    .unwrap();
    let times = residual_check_times(horizon, 10, 42);
    assert_eq!(times.len(), 10);
    let residuals = mild_residual(&p, &traj, &times).unwrap();
    let worst = residuals.iter().copied().fold(0.0f64, f64::max);
    assert!(worst < 1e-6, "worst residual {worst:.3e} above 1e-6");
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "[ACCEPT] criterion 6 PASS: independent-quadrature residual at 10 random times, \
         worst {worst:.2e} < 1e-6, {elapsed:.2} s"
    );
}

#[test]
fn criterion_07_perturbed_orbit_decays_inside_the_envelope() {
    let start = Instant::now();
    let p = problem(1.0, vec![0.01], tanh_term(10.0), cosine_mode1(), 8, 2e-4);
    let options = PicardOptions {
        require_certificate: true,
    };
    let (orbit, _) = find_periodic(&p, &options).unwrap();
    let perturbation = mode1_field(8, 0.1);
    let settings = AttractionSettings {
        horizon: 0.15,
        ..AttractionSettings::default()
    };
    let outcome = attraction_experiment(&p, &orbit, &perturbation, &settings).unwrap();

    let rho = outcome.decay_exponent.unwrap();
    assert_relative_eq!(rho, 77.33443150246649, max_relative = 1e-12);
    assert!(
        !outcome.fit.at_floor,
        "perturbed run should leave the floor"
    );
    assert!(
        outcome.fit.slope <= -73.5,
        "fitted slope {:.2} shallower than -73.5",
        outcome.fit.slope
    );
    assert_eq!(outcome.fit.slope_within_tolerance, Some(true));
    assert_eq!(outcome.weighted_bound_holds, Some(true));
    assert_eq!(outcome.sup_bound_holds, Some(true));
    outcome.enforce_bound().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 120.0,
        "experiment took {elapsed:.1} s (limit 120 s)"
    );
    println!(
        "[ACCEPT] criterion 7 PASS: fitted slope {:.2} <= -73.5 (rho {rho:.3}), decay \
         envelope held at all {} samples, {elapsed:.2} s",
        outcome.fit.slope,
        outcome.times.len()
    );
}

#[test]
fn criterion_08_delay_recurrence_never_beats_its_envelope() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut tightest = 0.0f64;
    let mut samples = 0usize;
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let bs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=5.0)).collect();
        let taus: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..=1.0)).collect();
        let psi0 = rng.gen_range(0.1..=2.0);
        let r = taus.iter().copied().fold(0.0f64, f64::max);
        let horizon = 5.0 * r;
        let dt = taus.iter().copied().fold(f64::INFINITY, f64::min) / 40.0;
        let run = simulate_delay_recurrence(psi0, &bs, &taus, horizon, dt).unwrap();
        for (t, psi) in run {
            let cap = bellman_envelope(psi0, &bs, t).unwrap();
            assert!(
                psi <= cap * (1.0 + 1e-12),
                "t = {t}: {psi} above envelope {cap} (b {bs:?}, tau {taus:?}, psi0 {psi0})"
            );
            tightest = tightest.max(psi / cap);
            samples += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 30.0,
        "recurrences took {elapsed:.1} s (limit 30 s)"
    );
    println!(
        "[ACCEPT] criterion 8 PASS: 50 randomized recurrences ({samples} samples) under \
         the growth envelope, tightest ratio {tightest:.3}, {elapsed:.2} s"
    );
}

#[test]
fn criterion_09_margin_arithmetic_is_reproduced_exactly() {
    let lambda1 = PI.powi(4) + PI.powi(2) - 1.0;
    assert_relative_eq!(lambda1, 106.27869543509179, max_relative = 1e-12);
    let sampling = HypothesisSampling {
        seed: 9,
        ..HypothesisSampling::default()
    };

    let certified = problem(1.0, vec![0.01], tanh_term(10.0), cosine_mode1(), 8, 1e-3);
    let report = check_hypotheses(&certified, None, &sampling);
    assert_relative_eq!(report.lambda1, lambda1, max_relative = 1e-12);
    assert_eq!(report.spectral_gap.status, ConditionStatus::Satisfied);
    assert_relative_eq!(
        report.spectral_gap.margin.unwrap(),
        96.27869543509179,
        max_relative = 1e-12
    );
    let contraction = report.contraction_factor.unwrap();
    assert_relative_eq!(contraction, 10.0 / lambda1, max_relative = 1e-12);
    assert_relative_eq!(contraction, 0.0940922351282281, max_relative = 1e-12);
    let rho = report.decay_exponent.unwrap();
    assert_relative_eq!(
        rho,
        lambda1 - 10.0 * (lambda1 * 0.01).exp(),
        max_relative = 1e-12
    );
    assert_relative_eq!(rho, 77.33443150246649, max_relative = 1e-12);
    assert!(report.certified());

    let long = problem(1.0, vec![0.05], tanh_term(10.0), cosine_mode1(), 8, 1e-3);
    let report = check_hypotheses(&long, None, &sampling);
    assert_eq!(
        report.delayed_spectral_gap.status,
        ConditionStatus::Violated
    );
    assert_relative_eq!(
        report.decay_exponent.unwrap(),
        -1925.201293008787,
        max_relative = 1e-12
    );

    // Without a reaction term the exponent is the full spectral rate.
    let bare = problem(
        1.0,
        vec![0.01],
        Nonlinearity::zero(1),
        cosine_mode1(),
        8,
        1e-3,
    );
    let report = check_hypotheses(&bare, None, &sampling);
    assert_relative_eq!(
        report.decay_exponent.unwrap(),
        lambda1,
        max_relative = 1e-12
    );

    assert_relative_eq!(
        decay_exponent(lambda1, &[10.0], &[0.01]).unwrap(),
        77.33443150246649,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        radius_bound(lambda1, 10.0, 2.0).unwrap(),
        2.0 / (lambda1 - 10.0),
        max_relative = 1e-12
    );
    assert_relative_eq!(
        bellman_envelope(1.0, &[1.5, 1.0], 1.0).unwrap(),
        12.182493960703473,
        max_relative = 1e-12
    );
    println!(
        "[ACCEPT] criterion 9 PASS: gap margin 96.27869543509179, exponents \
         77.33443150246649 and -1925.201293008787, contraction 0.0940922351282281, \
         growth anchor e^2.5 = 12.182493960703473, all at 1e-12 relative"
    );
}

#[test]
fn criterion_10_fixed_seed_runs_are_byte_identical() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_efk");
    let config_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let jobs: [(&str, &str, &[&str], &[&str]); 3] = [
        (
            "find-periodic",
            "certificate_tanh.json",
            &[],
            &["periodic_trajectory.csv", "convergence.json"],
        ),
        (
            "solve-ivp",
            "linear_cosine.json",
            &["--residual-check"],
            &["trajectory.csv", "trajectory.jsonl"],
        ),
        ("check", "long_delay.json", &[], &["hypothesis_report.json"]),
    ];
    let mut compared = 0usize;
    for (cmd, cfg, extra, artifacts) in jobs {
        let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
        let mut codes = Vec::new();
        for dir in &dirs {
            let out = Command::new(bin)
                .arg(cmd)
                .arg("--config")
                .arg(config_dir.join(cfg))
                .arg("--out")
                .arg(dir.path())
                .args(extra)
                .output()
                .expect("binary should launch");
            codes.push(out.status.code());
        }
        assert_eq!(codes[0], codes[1], "{cmd} exit codes differ between reruns");
        for name in artifacts {
            let a = std::fs::read(dirs[0].path().join(name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(name)).unwrap();
            assert!(a == b, "{cmd}: {name} differs between identical runs");
            compared += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "[ACCEPT] criterion 10 PASS: {compared} artifacts byte-identical across repeated \
         runs of three commands, {elapsed:.2} s"
    );
}
