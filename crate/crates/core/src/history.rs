//! Rolling solution history for delayed lookups, and the ways an initial
//! history segment can be supplied.
//!
//! A delayed solve needs `u` on `[t - r, t]` at every moment `t`, where
//! `r` is the largest delay. [`HistoryBuffer`] keeps exactly that sliding
//! window (plus slack) over a [`Trajectory`] and turns out-of-window
//! lookups into hard errors instead of silent extrapolation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::trajectory::Trajectory;

/// Sliding window of knots covering at least `[current - window, current]`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    knots: Trajectory,
    window: f64,
}

impl HistoryBuffer {
    /// `window` is the history length to retain (the largest delay).
    pub fn new(n_modes: usize, window: f64) -> Result<Self> {
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::domain(format!(
                "history window must be positive, got {window}"
            )));
        }
        Ok(HistoryBuffer {
            knots: Trajectory::new(n_modes),
            window,
        })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn coverage(&self) -> Option<(f64, f64)> {
        Some((self.knots.first_time()?, self.knots.last_time()?))
    }

    pub fn last_time(&self) -> Option<f64> {
        self.knots.last_time()
    }

    pub fn last_value(&self) -> Option<&SpectralField> {
        self.knots.last_value()
    }

    /// Appends a knot and prunes anything older than the retained window
    /// (a couple of knots of slack are kept so interpolation at the left
    /// edge still has a bracket).
    pub fn push(&mut self, t: f64, value: SpectralField, deriv: SpectralField) -> Result<()> {
        self.knots.push(t, value, deriv)?;
        let cutoff = t - self.window;
        self.knots.drop_before(cutoff);
        Ok(())
    }

    /// Rewrites the newest knot in place (corrector updates).
    pub fn replace_last(&mut self, value: SpectralField, deriv: SpectralField) -> Result<()> {
        self.knots.replace_last(value, deriv)
    }

    /// Hermite lookup; errors with the covered window when `t` falls
    /// outside it.
    pub fn interpolate(&self, t: f64) -> Result<SpectralField> {
        self.knots.interpolate(t)
    }

    /// Consumes the buffer, exposing the retained knots.
    pub fn into_trajectory(self) -> Trajectory {
        self.knots
    }
}

/// How the solution looked on `[-r, 0]` before a solve starts.
#[derive(Clone)]
pub enum InitialHistory {
    /// The same field at every time in `[-r, 0]`.
    Constant(SpectralField),
    /// Knots with derivative slots (for example a previously computed
    /// orbit). Knots outside `[-r, 0]` are dropped, except that the one
    /// immediately before `-r` is kept as a bracket when `-r` is not a
    /// knot time; the remainder must cover `[-r, 0]`.
    Table(Trajectory),
    /// Closed-form history `t -> u(t)`; derivatives are estimated by
    /// centered differences when the solver samples it.
    Closure {
        n_modes: usize,
        eval: Arc<dyn Fn(f64) -> SpectralField + Send + Sync>,
    },
}

impl std::fmt::Debug for InitialHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialHistory::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            InitialHistory::Table(tr) => f.debug_struct("Table").field("knots", &tr.len()).finish(),
            InitialHistory::Closure { n_modes, .. } => {
                f.debug_struct("Closure").field("n_modes", n_modes).finish()
            }
        }
    }
}

impl InitialHistory {
    pub fn zero(n_modes: usize) -> Self {
        InitialHistory::Constant(SpectralField::zeros(n_modes))
    }

    pub fn closure(
        n_modes: usize,
        eval: impl Fn(f64) -> SpectralField + Send + Sync + 'static,
    ) -> Self {
        InitialHistory::Closure {
            n_modes,
            eval: Arc::new(eval),
        }
    }

    pub fn n_modes(&self) -> usize {
        match self {
            InitialHistory::Constant(u) => u.n_modes(),
            InitialHistory::Table(tr) => tr.n_modes(),
            InitialHistory::Closure { n_modes, .. } => *n_modes,
        }
    }

    /// Samples the history on a uniform grid over `[-r, 0]` (spacing at
    /// most `step`) and attaches derivative slots: exact zeros for
    /// constants, stored slots for tables, fourth-order finite
    /// differences for closures.
    ///
    /// Only data on `[-r, 0]` is consulted, so two histories that agree
    /// there produce bitwise identical samplings.
    pub fn sample(&self, r: f64, step: f64) -> Result<Trajectory> {
        if !(r > 0.0) || !(step > 0.0) {
            return Err(Error::domain(format!(
                "history span {r} and sampling step {step} must be positive"
            )));
        }
        match self {
            InitialHistory::Constant(u) => {
                let zero = SpectralField::zeros(u.n_modes());
                let n = (r / step).ceil().max(1.0) as usize;
                let mut tr = Trajectory::new(u.n_modes());
                for i in 0..=n {
                    // Hit -r and 0 exactly; uniform in between.
                    let t = -r + r * i as f64 / n as f64;
                    let t = if i == n { 0.0 } else { t };
                    tr.push(t, u.clone(), zero.clone())?;
                }
                Ok(tr)
            }
            InitialHistory::Table(table) => {
                let times = table.times();
                let tol = 1e-12 * r.max(1.0);
                // First knot at or after -r; step back one knot when -r is
                // not itself a knot time, so the left edge stays bracketed.
                let mut start = times.partition_point(|&t| t < -r - tol);
                if start == times.len() || times[start] > -r + tol {
                    start = start.saturating_sub(1);
                }
                let end = times.partition_point(|&t| t <= tol);
                let mut clipped = Trajectory::new(table.n_modes());
                let knots = times[start..end]
                    .iter()
                    .zip(&table.values()[start..end])
                    .zip(&table.derivs()[start..end]);
                for ((&t, v), d) in knots {
                    clipped.push(t, v.clone(), d.clone())?;
                }
                let covers = clipped
                    .first_time()
                    .map(|t| t <= -r + 1e-9)
                    .unwrap_or(false)
                    && clipped.last_time().map(|t| t >= -1e-9).unwrap_or(false);
                if !covers {
                    return Err(Error::config(format!(
                        "history table must cover [-{r}, 0], has [{:?}, {:?}]",
                        clipped.first_time(),
                        clipped.last_time()
                    )));
                }
                Ok(clipped)
            }
            InitialHistory::Closure { n_modes, eval } => {
                let n = (r / step).ceil().max(4.0) as usize;
                let h = r / n as f64;
                let times: Vec<f64> = (0..=n)
                    .map(|i| if i == n { 0.0 } else { -r + h * i as f64 })
                    .collect();
                let values: Vec<SpectralField> = times.iter().map(|&t| eval(t)).collect();
                let mut tr = Trajectory::new(*n_modes);
                for (i, v) in values.iter().enumerate() {
                    let d = fd_derivative(&values, i, h);
                    tr.push(times[i], v.clone(), d)?;
                }
                Ok(tr)
            }
        }
    }
}

/// Fourth-order finite-difference derivative of uniformly sampled fields
/// (at least five samples). The five-point stencil is clamped to the span,
/// and the weight row matching the sample's position inside the stencil
/// is used, so only stored samples are consulted.
fn fd_derivative(values: &[SpectralField], i: usize, h: f64) -> SpectralField {
    // Differentiation weights (x 1/(12h)) for each position in a
    // five-point uniform stencil.
    const W: [[f64; 5]; 5] = [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
        [1.0, -8.0, 0.0, 8.0, -1.0],
        [-1.0, 6.0, -18.0, 10.0, 3.0],
        [3.0, -16.0, 36.0, -48.0, 25.0],
    ];
    let n = values.len() - 1;
    debug_assert!(n >= 4, "need at least five samples for the stencil");
    let base = if i < 2 {
        0
    } else if i + 2 > n {
        n - 4
    } else {
        i - 2
    };
    let row = &W[i - base];
    let mut acc = SpectralField::zeros(values[0].n_modes());
    for (k, w) in row.iter().enumerate() {
        if *w != 0.0 {
            acc = acc.add_scaled(w / (12.0 * h), &values[base + k]).unwrap();
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field(vals: &[f64]) -> SpectralField {
        SpectralField::new(vals.to_vec()).unwrap()
    }

    #[test]
    fn buffer_prunes_but_keeps_window_coverage() {
        let mut buf = HistoryBuffer::new(1, 0.5).unwrap();
        for i in 0..100 {
            let t = i as f64 * 0.1;
            buf.push(t, field(&[t]), field(&[1.0])).unwrap();
        }
        let (start, end) = buf.coverage().unwrap();
        assert_eq!(end, 9.9);
        assert!(start <= 9.9 - 0.5 + 1e-12);
        assert!(start > 8.0, "pruning did not happen (start {start})");
        // The full window is still interpolable.
        assert_relative_eq!(
            buf.interpolate(9.4).unwrap().coeffs()[0],
            9.4,
            epsilon = 1e-12
        );
        assert!(buf.interpolate(8.0).is_err());
    }

    #[test]
    fn constant_history_samples_exact_endpoints() {
        let h = InitialHistory::Constant(field(&[2.5]));
        let tr = h.sample(0.3, 0.05).unwrap();
        assert_eq!(tr.first_time().unwrap(), -0.3);
        assert_eq!(tr.last_time().unwrap(), 0.0);
        for v in tr.values() {
            assert_eq!(v.coeffs()[0], 2.5);
        }
        for d in tr.derivs() {
            assert_eq!(d.coeffs()[0], 0.0);
        }
    }

    #[test]
    fn closure_history_gets_accurate_derivatives() {
        let h = InitialHistory::closure(1, |t| field(&[(3.0 * t).sin()]));
        let tr = h.sample(0.5, 0.01).unwrap();
        for (&t, d) in tr.times().iter().zip(tr.derivs()) {
            assert_relative_eq!(d.coeffs()[0], 3.0 * (3.0 * t).cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn table_history_must_cover_span() {
        let mut short = Trajectory::new(1);
        short.push(-0.1, field(&[0.0]), field(&[0.0])).unwrap();
        short.push(0.0, field(&[0.0]), field(&[0.0])).unwrap();
        let h = InitialHistory::Table(short);
        assert!(h.sample(0.3, 0.05).is_err());
    }

    #[test]
    fn table_knots_outside_span_are_ignored() {
        let mk = |with_early: bool| {
            let mut tr = Trajectory::new(1);
            if with_early {
                tr.push(-1.0, field(&[999.0]), field(&[123.0])).unwrap();
            }
            for i in 0..=6 {
                let t = -0.3 + 0.05 * i as f64;
                tr.push(t, field(&[t * t]), field(&[2.0 * t])).unwrap();
            }
            InitialHistory::Table(tr).sample(0.3, 0.05).unwrap()
        };
        let a = mk(false);
        let b = mk(true);
        assert_eq!(a.times(), b.times());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x, y);
        }
    }
}
