//! External forcing `g(t, x)`.
//!
//! The primary representation is a sum of separable harmonic terms
//! `c * wave(W t + phase) * sin(j pi x)` with `wave` either cosine or
//! sine. When a period `omega` is declared, every angular frequency must
//! be a whole multiple of `2 pi / omega` so that `g(t + omega, .) =
//! g(t, .)` holds exactly; terms with `W = 0` give time-constant forcing.
//!
//! A sampled table (spectral coefficient vectors on a time grid, linear
//! in between) is supported as a fallback for data that does not separate;
//! consumers that rely on closed forms detect the table and switch to a
//! quadrature path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::transform::SineTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Cos,
    Sin,
}

impl Waveform {
    fn eval(self, arg: f64) -> f64 {
        match self {
            Waveform::Cos => arg.cos(),
            Waveform::Sin => arg.sin(),
        }
    }
}

/// One separable term `amplitude * wave(angular_frequency * t + phase)
/// * sin(mode * pi * x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    pub waveform: Waveform,
    pub angular_frequency: f64,
    pub phase: f64,
    /// Spatial mode index `j` in `sin(j pi x)`, 1-based.
    pub mode: usize,
}

impl HarmonicTerm {
    /// Time-dependent factor of the term.
    pub fn time_factor(&self, t: f64) -> f64 {
        self.amplitude * self.waveform.eval(self.angular_frequency * t + self.phase)
    }
}

/// Sampled fallback: coefficient vectors on an increasing time grid,
/// linearly interpolated (wrapped when a period is declared).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledForcing {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

/// Complete forcing description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    terms: Vec<HarmonicTerm>,
    table: Option<SampledForcing>,
    period: Option<f64>,
}

impl Forcing {
    /// No forcing at all.
    pub fn none() -> Self {
        Forcing {
            terms: Vec::new(),
            table: None,
            period: None,
        }
    }

    /// Harmonic forcing, optionally declared periodic with period `omega`.
    /// With a declared period every frequency must be `2 pi m / omega`
    /// for a whole `m >= 0`.
    pub fn harmonic(terms: Vec<HarmonicTerm>, period: Option<f64>) -> Result<Self> {
        for term in &terms {
            if term.mode == 0 {
                return Err(Error::config("forcing mode index must be >= 1"));
            }
            if !term.amplitude.is_finite()
                || !term.angular_frequency.is_finite()
                || !term.phase.is_finite()
            {
                return Err(Error::config("forcing parameters must be finite"));
            }
            if term.angular_frequency < 0.0 {
                return Err(Error::config("angular frequency must be non-negative"));
            }
        }
        if let Some(omega) = period {
            if !(omega > 0.0) || !omega.is_finite() {
                return Err(Error::domain(format!(
                    "period must be positive, got {omega}"
                )));
            }
            for term in &terms {
                let cycles = term.angular_frequency * omega / (2.0 * std::f64::consts::PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "frequency {} is not periodic with period {} ({} cycles)",
                        term.angular_frequency, omega, cycles
                    )));
                }
            }
        }
        Ok(Forcing {
            terms,
            table: None,
            period,
        })
    }

    /// The common convenience: one term `amplitude * wave(2 pi m t / omega
    /// + phase) * sin(mode pi x)` declared periodic with period `omega`.
    pub fn single_harmonic(
        amplitude: f64,
        waveform: Waveform,
        harmonic: u32,
        phase: f64,
        mode: usize,
        omega: f64,
    ) -> Result<Self> {
        let w = 2.0 * std::f64::consts::PI * harmonic as f64 / omega;
        Forcing::harmonic(
            vec![HarmonicTerm {
                amplitude,
                waveform,
                angular_frequency: w,
                phase,
                mode,
            }],
            Some(omega),
        )
    }

    /// Tabulated forcing. Times must increase strictly; every coefficient
    /// row must have the same length.
    pub fn sampled(table: SampledForcing, period: Option<f64>) -> Result<Self> {
        if table.times.len() < 2 || table.times.len() != table.coeffs.len() {
            return Err(Error::config(
                "sampled forcing needs >= 2 knots and matching coefficient rows",
            ));
        }
        if !table.times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::config(
                "sampled forcing times must increase strictly",
            ));
        }
        let n = table.coeffs[0].len();
        if n == 0 || table.coeffs.iter().any(|row| row.len() != n) {
            return Err(Error::config(
                "sampled forcing rows must share one mode count",
            ));
        }
        Ok(Forcing {
            terms: Vec::new(),
            table: Some(table),
            period,
        })
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// True when the forcing is a finite sum of separable harmonics, the
    /// case with a closed-form periodic response.
    pub fn is_separable(&self) -> bool {
        self.table.is_none()
    }

    pub fn terms(&self) -> &[HarmonicTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_none() && self.terms.iter().all(|t| t.amplitude == 0.0)
    }

    /// Spectral coefficients of `g(t, .)` truncated to `n_modes`.
    pub fn spectral_at(&self, t: f64, n_modes: usize) -> SpectralField {
        let mut coeffs = vec![0.0; n_modes];
        for term in &self.terms {
            if term.mode <= n_modes {
                // sin(j pi x) = (1/sqrt(2)) * [orthonormal basis function j]
                coeffs[term.mode - 1] += term.time_factor(t) / std::f64::consts::SQRT_2;
            }
        }
        if let Some(table) = &self.table {
            let row = self.table_row(table, t);
            for (c, r) in coeffs.iter_mut().zip(row) {
                *c += r;
            }
        }
        SpectralField::new(coeffs).expect("forcing coefficients are finite by construction")
    }

    /// Physical samples of `g(t, .)` at the collocation nodes of
    /// `transform`.
    pub fn physical_at(&self, t: f64, transform: &SineTransform) -> Vec<f64> {
        let mut samples = vec![0.0; transform.n_nodes()];
        for term in &self.terms {
            let factor = term.time_factor(t);
            if factor != 0.0 {
                let jpi = term.mode as f64 * std::f64::consts::PI;
                for (s, &x) in samples.iter_mut().zip(transform.nodes()) {
                    *s += factor * (jpi * x).sin();
                }
            }
        }
        if let Some(table) = &self.table {
            let row = self.table_row(table, t);
            let field = SpectralField::new(row).expect("table rows validated finite");
            // Tables carry at most the resolved mode count; pad/truncate.
            let mut padded = vec![0.0; transform.n_modes()];
            for (p, &c) in padded.iter_mut().zip(field.coeffs()) {
                *p = c;
            }
            let extra = transform
                .to_physical(&SpectralField::new(padded).expect("finite"))
                .expect("shape fixed above");
            for (s, e) in samples.iter_mut().zip(extra) {
                *s += e;
            }
        }
        samples
    }

    /// Point value `g(t, x)` for arbitrary `x` in `(0, 1)`.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let mut value = 0.0;
        for term in &self.terms {
            value += term.time_factor(t) * (term.mode as f64 * std::f64::consts::PI * x).sin();
        }
        if let Some(table) = &self.table {
            for (k, a) in self.table_row(table, t).into_iter().enumerate() {
                value += a
                    * std::f64::consts::SQRT_2
                    * ((k + 1) as f64 * std::f64::consts::PI * x).sin();
            }
        }
        value
    }

    /// A bound on `sup_{t, x} |g(t, x)|`: the triangle inequality over
    /// terms, plus the worst table row measured in the same way.
    pub fn sup_bound(&self) -> f64 {
        let mut bound: f64 = self.terms.iter().map(|t| t.amplitude.abs()).sum();
        if let Some(table) = &self.table {
            let worst = table
                .coeffs
                .iter()
                .map(|row| row.iter().map(|a| a.abs()).sum::<f64>() * std::f64::consts::SQRT_2)
                .fold(0.0, f64::max);
            bound += worst;
        }
        bound
    }

    fn table_row(&self, table: &SampledForcing, t: f64) -> Vec<f64> {
        let mut t = t;
        if let Some(omega) = self.period {
            t = t.rem_euclid(omega);
        }
        let times = &table.times;
        let t = t.clamp(times[0], *times.last().unwrap());
        let idx = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => return table.coeffs[i].clone(),
            Err(i) => i.clamp(1, times.len() - 1),
        };
        let (t0, t1) = (times[idx - 1], times[idx]);
        let s = (t - t0) / (t1 - t0);
        table.coeffs[idx - 1]
            .iter()
            .zip(&table.coeffs[idx])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_spatial_forcing_projects_to_inverse_sqrt2() {
        // g(t, x) = sin(pi x): coefficient on the first orthonormal mode
        // is <sin(pi x), sqrt(2) sin(pi x)> = 1/sqrt(2).
        let g = Forcing::single_harmonic(1.0, Waveform::Cos, 0, 0.0, 1, 1.0).unwrap();
        let coeffs = g.spectral_at(3.7, 4);
        assert_relative_eq!(
            coeffs.coeff(1).unwrap(),
            1.0 / 2.0f64.sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(coeffs.coeff(2).unwrap(), 0.0);
    }

    #[test]
    fn declared_period_holds_exactly_for_harmonics() {
        let omega = 0.7;
        let g = Forcing::single_harmonic(2.0, Waveform::Sin, 3, 0.4, 2, omega).unwrap();
        for &t in &[0.0, 0.1, 0.33, 0.69] {
            let a = g.spectral_at(t, 4);
            let b = g.spectral_at(t + omega, 4);
            assert_relative_eq!(a.coeff(2).unwrap(), b.coeff(2).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn incommensurate_frequency_rejected_for_declared_period() {
        let term = HarmonicTerm {
            amplitude: 1.0,
            waveform: Waveform::Cos,
            angular_frequency: 1.0,
            phase: 0.0,
            mode: 1,
        };
        assert!(Forcing::harmonic(vec![term], Some(1.0)).is_err());
    }

    #[test]
    fn physical_and_spectral_routes_agree() {
        let tf = SineTransform::new(8, 16).unwrap();
        let g = Forcing::single_harmonic(1.5, Waveform::Cos, 1, 0.2, 3, 1.0).unwrap();
        let t = 0.37;
        let via_samples = tf.to_spectral(&g.physical_at(t, &tf)).unwrap();
        let direct = g.spectral_at(t, 8);
        for k in 1..=8 {
            assert_relative_eq!(
                via_samples.coeff(k).unwrap(),
                direct.coeff(k).unwrap(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn sampled_table_interpolates_and_wraps() {
        let table = SampledForcing {
            times: vec![0.0, 0.5, 1.0],
            coeffs: vec![vec![0.0], vec![1.0], vec![0.0]],
        };
        let g = Forcing::sampled(table, Some(1.0)).unwrap();
        assert!(!g.is_separable());
        assert_relative_eq!(g.spectral_at(0.25, 1).coeff(1).unwrap(), 0.5);
        assert_relative_eq!(g.spectral_at(1.25, 1).coeff(1).unwrap(), 0.5);
    }

    #[test]
    fn sampled_table_shape_validation() {
        let bad = SampledForcing {
            times: vec![0.0, 0.5],
            coeffs: vec![vec![0.0], vec![1.0, 2.0]],
        };
        assert!(Forcing::sampled(bad, None).is_err());
        let nonmono = SampledForcing {
            times: vec![0.0, 0.0],
            coeffs: vec![vec![0.0], vec![1.0]],
        };
        assert!(Forcing::sampled(nonmono, None).is_err());
    }
}
