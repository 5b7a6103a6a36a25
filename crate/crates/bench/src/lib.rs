//! Shared fixtures for the benchmark suite.

use efk_core::{
    DelaySpec, Discretization, Forcing, Nonlinearity, NonlinearityKind, ProblemSpec, Tolerances,
    Waveform,
};

/// A delayed saturating-feedback problem with a unit cosine drive on the
/// first mode; the workhorse configuration for timing the solver stack.
pub fn tanh_problem(n_modes: usize, step: f64) -> ProblemSpec {
    let nonlinearity =
        Nonlinearity::new(NonlinearityKind::TanhScaled { beta: 10.0, arg: 1 }, 1).unwrap();
    let forcing = Forcing::single_harmonic(1.0, Waveform::Cos, 1, 0.0, 1, 1.0).unwrap();
    ProblemSpec::new(
        1.0,
        1.0,
        DelaySpec::new(vec![0.01]).unwrap(),
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
