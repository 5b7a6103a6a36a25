//! Time-stamped field sequences with smooth interpolation.
//!
//! Each knot stores the field and its time derivative, so lookups between
//! knots use piecewise cubic Hermite interpolation: with exact derivative
//! slots the value error is `O(h^4)` (the classical `h^4/384 * max|u''''|`
//! bound per interval), which keeps delayed-argument lookups from
//! polluting a second-order stepper. Derivative slots come for free
//! during integration because the stepper already evaluates the
//! right-hand side at every knot.

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// An ordered sequence of `(t, u(t), u'(t))` knots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<SpectralField>,
    derivs: Vec<SpectralField>,
    n_modes: usize,
}

impl Trajectory {
    pub fn new(n_modes: usize) -> Self {
        Trajectory {
            times: Vec::new(),
            values: Vec::new(),
            derivs: Vec::new(),
            n_modes,
        }
    }

    /// Builds a trajectory from parallel arrays. Times must increase
    /// strictly and all fields must share the mode count.
    pub fn from_knots(
        times: Vec<f64>,
        values: Vec<SpectralField>,
        derivs: Vec<SpectralField>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() || times.len() != derivs.len() {
            return Err(Error::config(
                "trajectory needs equal non-empty times/values/derivatives",
            ));
        }
        let n_modes = values[0].n_modes();
        let mut out = Trajectory::new(n_modes);
        for ((t, v), d) in times.into_iter().zip(values).zip(derivs) {
            out.push(t, v, d)?;
        }
        Ok(out)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn derivs(&self) -> &[SpectralField] {
        &self.derivs
    }

    pub fn first_time(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn last_value(&self) -> Option<&SpectralField> {
        self.values.last()
    }

    /// Appends a knot; time must exceed the current last knot.
    pub fn push(&mut self, t: f64, value: SpectralField, deriv: SpectralField) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::domain(format!("knot time must be finite, got {t}")));
        }
        if value.n_modes() != self.n_modes || deriv.n_modes() != self.n_modes {
            return Err(Error::ShapeMismatch {
                expected: self.n_modes,
                actual: value.n_modes().max(deriv.n_modes()),
            });
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::domain(format!(
                    "knot times must increase strictly: {t} after {last}"
                )));
            }
        }
        self.times.push(t);
        self.values.push(value);
        self.derivs.push(deriv);
        Ok(())
    }

    /// Replaces the most recent knot (the corrector step of the
    /// integrator rewrites its provisional prediction in place).
    pub fn replace_last(&mut self, value: SpectralField, deriv: SpectralField) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::config(
                "cannot replace a knot in an empty trajectory",
            ));
        }
        if value.n_modes() != self.n_modes || deriv.n_modes() != self.n_modes {
            return Err(Error::ShapeMismatch {
                expected: self.n_modes,
                actual: value.n_modes().max(deriv.n_modes()),
            });
        }
        *self.values.last_mut().unwrap() = value;
        *self.derivs.last_mut().unwrap() = deriv;
        Ok(())
    }

    /// Drops the leading knots strictly before `cutoff`, always keeping
    /// at least one knot at or before it so interpolation at `cutoff`
    /// stays possible.
    pub fn drop_before(&mut self, cutoff: f64) {
        let keep_from = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&cutoff).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if keep_from > 0 {
            self.times.drain(..keep_from);
            self.values.drain(..keep_from);
            self.derivs.drain(..keep_from);
        }
    }

    /// Cubic Hermite evaluation at `t` within the covered span. Exactly
    /// reproduces knot values at knot times.
    pub fn interpolate(&self, t: f64) -> Result<SpectralField> {
        let (first, last) = match (self.first_time(), self.last_time()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::HistoryUnderrun {
                    requested: t,
                    window_start: f64::NAN,
                    window_end: f64::NAN,
                })
            }
        };
        // Knot times come from grid arithmetic (multiplication, period
        // shifts), so a lookup aimed at an endpoint can miss it by a few
        // ulps; such misses are clamped to the endpoint instead of failing.
        let tol = 32.0 * f64::EPSILON * (last - first).max(first.abs()).max(last.abs()).max(1.0);
        if t < first - tol || t > last + tol {
            return Err(Error::HistoryUnderrun {
                requested: t,
                window_start: first,
                window_end: last,
            });
        }
        let t = t.clamp(first, last);
        let idx = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok(self.values[i].clone()),
            Err(i) => i, // first knot strictly above t; t is interior, so 1..len
        };
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = hermite_weights(s);
        let v0 = &self.values[idx - 1];
        let v1 = &self.values[idx];
        let d0 = &self.derivs[idx - 1];
        let d1 = &self.derivs[idx];
        let coeffs: Vec<f64> = (0..self.n_modes)
            .map(|i| {
                h00 * v0.coeffs()[i]
                    + h10 * h * d0.coeffs()[i]
                    + h01 * v1.coeffs()[i]
                    + h11 * h * d1.coeffs()[i]
            })
            .collect();
        SpectralField::new(coeffs)
    }
}

/// The four cubic Hermite basis polynomials at parameter `s` in [0, 1].
fn hermite_weights(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}
