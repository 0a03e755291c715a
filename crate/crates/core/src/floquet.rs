//! Floquet multipliers, exponents and periodic modes.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

/// Principal exponent `(ln|mu| + i arg mu) / period` with `Im` in `(-pi/period, pi/period]`.
///
/// A zero multiplier maps to an exponent with real part `-inf`.
pub fn exponent(mu: Complex64, period: f64) -> Complex64 {
    let mut arg = mu.arg();
    if arg <= -PI {
        arg = PI;
    }
    Complex64::new(mu.norm().ln() / period, arg / period)
}

/// Phase of `mu` in `(-pi, pi]`.
pub fn principal_arg(mu: Complex64) -> f64 {
    let a = mu.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Magnitude descending, then phase ascending.
pub fn compare_multipliers(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm().total_cmp(&a.norm()).then(principal_arg(*a).total_cmp(&principal_arg(*b)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Multiplier {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub exponent: Complex64,
    pub converged: bool,
    /// Relative distance to the nearest multiplier on the refined grid.
    pub refinement_error: f64,
}

/// Periodic factor `r(s)` of a Floquet solution `z(s) = exp(lambda s) r(s)`.
#[derive(Debug, Clone)]
pub struct PeriodicMode {
    pub multiplier: Complex64,
    pub exponent: Complex64,
    /// `samples + 1` values on the nodes of `[0, period]`.
    pub samples: Vec<DVector<Complex64>>,
    /// `||r(period) - r(0)|| / max ||r||`.
    pub periodicity_residual: f64,
}

impl PeriodicMode {
    /// The same Floquet solution written with exponent `lambda + i 2 pi k / period`.
    ///
    /// The periodic factor absorbs `exp(-i 2 pi k s / period)`, so `exp(lambda s) r(s)` is unchanged.
    pub fn shifted(&self, k: i64, period: f64) -> PeriodicMode {
        let omega = 2.0 * PI * k as f64 / period;
        let h = period / (self.samples.len() - 1) as f64;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, r)| r * Complex64::from_polar(1.0, -omega * j as f64 * h))
            .collect();
        PeriodicMode {
            multiplier: self.multiplier,
            exponent: self.exponent + Complex64::new(0.0, omega),
            samples,
            periodicity_residual: self.periodicity_residual,
        }
    }

    /// Reconstructed solution `exp(lambda s) r(s)` on the mode nodes.
    pub fn solution(&self, period: f64) -> Vec<DVector<Complex64>> {
        let h = period / (self.samples.len() - 1) as f64;
        self.samples.iter().enumerate().map(|(j, r)| r * (self.exponent * (j as f64 * h)).exp()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FloquetDecomposition {
    pub period: f64,
    pub samples: usize,
    /// Candidates sorted by magnitude then phase; unconverged ones are kept for diagnostics.
    pub multipliers: Vec<Multiplier>,
    /// Modes of the largest retained multipliers, in the same order.
    pub modes: Vec<PeriodicMode>,
}

impl FloquetDecomposition {
    /// Decomposition holding the given multipliers, all marked converged, without modes.
    pub fn from_multipliers(period: f64, values: &[Complex64]) -> Self {
        let mut multipliers: Vec<Multiplier> = values
            .iter()
            .map(|&mu| Multiplier { value: mu, exponent: exponent(mu, period), converged: true, refinement_error: 0.0 })
            .collect();
        multipliers.sort_by(|a, b| compare_multipliers(&a.value, &b.value));
        Self { period, samples: 0, multipliers, modes: Vec::new() }
    }

    pub fn retained(&self) -> impl Iterator<Item = &Multiplier> {
        self.multipliers.iter().filter(|m| m.converged)
    }

    pub fn p_retained(&self) -> usize {
        self.retained().count()
    }

    pub fn dominant(&self) -> Option<&Multiplier> {
        self.retained().next()
    }
}

pub(crate) fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&finite_or_none(z.re))?;
    t.serialize_element(&finite_or_none(z.im))?;
    t.end()
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
