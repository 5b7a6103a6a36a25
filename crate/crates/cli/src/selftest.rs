//! Built-in cross-check suite at small problem sizes.
//!
//! Each check compares two independent routes to the same quantity, so a
//! silent regression in either route shows up as a disagreement. The
//! `--fault` flag deliberately injects a known defect (a wrong kernel, a
//! starved history window) to demonstrate that the checks actually catch
//! faults rather than passing vacuously.

use clap::ValueEnum;

use efk_core::{
    bellman_envelope, decay_exponent, find_periodic, linear_periodic_solution,
    simulate_delay_recurrence, solve_ivp, solve_with_kernels, DelaySpec, Discretization, Error,
    Forcing, GreensKernelPair, InitialHistory, Nonlinearity, NonlinearityKind, OperatorSpectrum,
    PicardOptions, ProblemSpec, SineTransform, SolverOptions, SpectralField, Tolerances, Waveform,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Run the suite as shipped.
    None,
    /// Build the oscillatory factor kernel from the wrong factor root.
    GreensTypo,
    /// Starve the history buffer to half the largest delay.
    HistoryUnderrun,
}

type Check = (&'static str, fn(Fault) -> Result<String, String>);

pub fn run(fault: Fault) -> i32 {
    let checks: &[Check] = &[
        ("transform round trip", transform_round_trip),
        ("kernel-quadrature cross-check", greens_cross_check),
        ("semigroup decay bound", semigroup_decay),
        ("steady state under constant forcing", steady_state),
        ("periodic sweep matches closed form", periodic_closed_form),
        ("periodic wrap invariance", wrap_invariance),
        ("delayed lookups stay inside the window", history_window),
        ("growth envelope dominance", envelope_dominance),
        ("decay exponent arithmetic", exponent_arithmetic),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check(fault) {
            Ok(detail) => println!("[selftest] {name}: ok ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("[selftest] {name}: FAIL - {detail}");
            }
        }
    }
    println!(
        "selftest: {}/{} checks passed",
        checks.len() - failures,
        checks.len()
    );
    if failures > 0 {
        1
    } else {
        0
    }
}

fn small_problem(nl: Nonlinearity, forcing: Forcing, tau: f64, step: f64) -> ProblemSpec {
    ProblemSpec::new(
        1.0,
        1.0,
        DelaySpec::new(vec![tau]).expect("positive delay"),
        nl,
        forcing,
        Discretization {
            n_modes: 4,
            n_nodes: 8,
            step,
        },
        Tolerances::default(),
    )
    .expect("valid small problem")
}

fn transform_round_trip(_fault: Fault) -> Result<String, String> {
    let tf = SineTransform::new(8, 16).map_err(|e| e.to_string())?;
    let coeffs: Vec<f64> = (1..=8)
        .map(|k| 0.1 * k as f64 * (-1.0f64).powi(k))
        .collect();
    let u = SpectralField::new(coeffs).map_err(|e| e.to_string())?;
    let samples = tf.to_physical(&u).map_err(|e| e.to_string())?;
    let back = tf.to_spectral(&samples).map_err(|e| e.to_string())?;
    let gap = back.sub(&u).map_err(|e| e.to_string())?.norm_l2();
    if gap > 1e-12 {
        return Err(format!("round-trip gap {gap:e}"));
    }
    Ok(format!("gap {gap:e}"))
}

fn greens_cross_check(fault: Fault) -> Result<String, String> {
    let gamma = 1.0;
    let transform = SineTransform::new(16, 32).map_err(|e| e.to_string())?;
    let spectrum = OperatorSpectrum::new(gamma, 16).map_err(|e| e.to_string())?;
    let phi =
        |x: f64| (std::f64::consts::PI * x).sin() + 0.3 * (2.0 * std::f64::consts::PI * x).sin();

    let pair = GreensKernelPair::new(gamma).map_err(|e| e.to_string())?;
    // The injected typo builds the oscillatory kernel from the positive
    // factor root instead of the negative one.
    let nu = match fault {
        Fault::GreensTypo => pair.mu1().sqrt(),
        _ => (-pair.mu2()).sqrt(),
    };
    let inner = move |y: f64, z: f64| {
        let (lo, hi) = if y <= z { (y, z) } else { (z, y) };
        (nu * lo).sin() * (nu * (1.0 - hi)).sin() / (nu * nu.sin())
    };
    let quadrature =
        solve_with_kernels(gamma, inner, |x, y| pair.g1(x, y), phi, &transform, 4 * 33)
            .map_err(|e| e.to_string())?;

    let projected = transform
        .to_spectral(
            &transform
                .nodes()
                .iter()
                .map(|&x| phi(x))
                .collect::<Vec<_>>(),
        )
        .map_err(|e| e.to_string())?;
    let diagonal = spectrum.solve(&projected).map_err(|e| e.to_string())?;

    let err = quadrature
        .sub(&diagonal)
        .map_err(|e| e.to_string())?
        .norm_l2()
        / diagonal.norm_l2();
    if err > 1e-9 {
        return Err(format!("route disagreement {err:e} above 1e-9"));
    }
    Ok(format!("relative gap {err:e}"))
}

fn semigroup_decay(_fault: Fault) -> Result<String, String> {
    let spectrum = OperatorSpectrum::new(1.0, 8).map_err(|e| e.to_string())?;
    let lambda1 = spectrum.lambda1();
    // Deterministic pseudo-random coefficients.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for _ in 0..20 {
        let u = SpectralField::new((0..8).map(|_| next()).collect()).map_err(|e| e.to_string())?;
        for &t in &[1e-3, 1e-2, 1e-1] {
            let decayed = spectrum
                .apply_semigroup(t, &u)
                .map_err(|e| e.to_string())?
                .norm_l2();
            let bound = (-lambda1 * t).exp() * u.norm_l2();
            if decayed > bound * (1.0 + 1e-12) {
                return Err(format!("norm {decayed:e} above bound {bound:e} at t = {t}"));
            }
        }
    }
    Ok("20 fields, 3 horizons".to_string())
}

fn steady_state(_fault: Fault) -> Result<String, String> {
    let forcing =
        Forcing::single_harmonic(1.0, Waveform::Cos, 0, 0.0, 1, 1.0).map_err(|e| e.to_string())?;
    let p = small_problem(Nonlinearity::zero(1), forcing, 0.01, 1e-3);
    let run = solve_ivp(&p, &InitialHistory::zero(4), 0.2, &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let a1 = run
        .values()
        .last()
        .ok_or("empty trajectory")?
        .coeff(1)
        .map_err(|e| e.to_string())?;
    let expected = (1.0 / 2.0f64.sqrt()) / p.spectrum().lambda1();
    let err = (a1 - expected).abs() / expected;
    if err > 1e-6 {
        return Err(format!("steady coefficient off by {err:e}"));
    }
    Ok(format!("relative error {err:e}"))
}

fn periodic_closed_form(_fault: Fault) -> Result<String, String> {
    let forcing =
        Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).map_err(|e| e.to_string())?;
    let p = small_problem(Nonlinearity::zero(1), forcing, 0.01, 2e-3);
    let (orbit, report) =
        find_periodic(&p, &PicardOptions::default()).map_err(|e| e.to_string())?;
    let exact = linear_periodic_solution(&p, orbit.knots().len() - 1)
        .map_err(|e| e.to_string())?
        .ok_or("closed form unavailable for separable forcing")?;
    let gap = orbit.max_distance(&exact).map_err(|e| e.to_string())?;
    if gap > 1e-6 {
        return Err(format!("sweep vs closed form gap {gap:e}"));
    }
    Ok(format!("gap {gap:e}, {} iterations", report.iterations))
}

fn wrap_invariance(_fault: Fault) -> Result<String, String> {
    let forcing =
        Forcing::single_harmonic(1.0, Waveform::Sin, 1, 0.4, 1, 1.0).map_err(|e| e.to_string())?;
    let p = small_problem(Nonlinearity::zero(1), forcing, 0.01, 1e-2);
    let orbit = linear_periodic_solution(&p, 100)
        .map_err(|e| e.to_string())?
        .ok_or("closed form unavailable")?;
    for &t in &[0.0, 0.3, 0.77] {
        let a = orbit.eval(t).map_err(|e| e.to_string())?;
        let b = orbit.eval(t + 1.0).map_err(|e| e.to_string())?;
        let gap = a.sub(&b).map_err(|e| e.to_string())?.norm_l2();
        if gap > 1e-12 {
            return Err(format!("wrap gap {gap:e} at t = {t}"));
        }
    }
    Ok("3 offsets".to_string())
}

fn history_window(fault: Fault) -> Result<String, String> {
    let nl = Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 }, 1)
        .map_err(|e| e.to_string())?;
    let forcing =
        Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).map_err(|e| e.to_string())?;
    let tau = 0.01;
    let p = small_problem(nl, forcing, tau, 1e-3);
    let options = SolverOptions {
        history_window: match fault {
            Fault::HistoryUnderrun => Some(tau / 2.0),
            _ => None,
        },
        ..SolverOptions::default()
    };
    let kappa =
        InitialHistory::Constant(SpectralField::basis(4, 1, 0.1).map_err(|e| e.to_string())?);
    match solve_ivp(&p, &kappa, 0.03, &options) {
        Ok(run) => Ok(format!("{} knots retained", run.len())),
        Err(Error::HistoryUnderrun {
            requested,
            window_start,
            window_end,
        }) => Err(format!(
            "history underrun: t = {requested} outside [{window_start}, {window_end}]"
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn envelope_dominance(_fault: Fault) -> Result<String, String> {
    let bs = [2.0, 1.5];
    let taus = [0.3, 0.7];
    let witness =
        simulate_delay_recurrence(1.0, &bs, &taus, 3.5, 0.3 / 50.0).map_err(|e| e.to_string())?;
    for &(t, psi) in &witness {
        let env = bellman_envelope(1.0, &bs, t).map_err(|e| e.to_string())?;
        if psi > env * (1.0 + 1e-9) {
            return Err(format!("witness {psi:e} above envelope {env:e} at t = {t}"));
        }
    }
    Ok(format!("{} grid points", witness.len()))
}

fn exponent_arithmetic(_fault: Fault) -> Result<String, String> {
    let lambda1 = OperatorSpectrum::new(1.0, 1)
        .map_err(|e| e.to_string())?
        .lambda1();
    let rho = decay_exponent(lambda1, &[10.0], &[0.01]).map_err(|e| e.to_string())?;
    let expected = lambda1 - 10.0 * (lambda1 * 0.01).exp();
    let err = (rho - expected).abs() / expected.abs();
    if err > 1e-13 {
        return Err(format!("exponent arithmetic off by {err:e}"));
    }
    let anchor = 2.5f64.exp();
    if (anchor - 12.182493960703473).abs() > 1e-14 {
        return Err("exponential anchor failed".to_string());
    }
    Ok(format!("rho = {rho:.6}"))
}
