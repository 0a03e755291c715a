use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{FloquetError, Result};
use crate::floquet::{ser_complex, FloquetDecomposition, PeriodicMode};
use crate::perturbation::nonlinear::LimitCycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

/// Exponents `re + i (im + 2 pi k / T)` for all integers `k` describe the same solutions.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentClass {
    #[serde(serialize_with = "ser_complex")]
    pub multiplier: Complex64,
    pub real_part: f64,
    /// Representative imaginary part in `(-pi/T, pi/T]`.
    pub imaginary_part: f64,
    /// Spacing `2 pi / T` of equivalent imaginary parts.
    pub imaginary_spacing: f64,
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    #[serde(serialize_with = "ser_opt_complex")]
    pub trivial_multiplier: Option<Complex64>,
    /// `|mu - 1|` for the trivial multiplier.
    pub phase_error: Option<f64>,
    /// Largest magnitude among the non-trivial retained multipliers.
    pub max_modulus: Option<f64>,
    pub unit_tolerance: f64,
    pub classes: Vec<ExponentClass>,
}

fn ser_opt_complex<S: serde::Serializer>(z: &Option<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match z {
        Some(z) => ser_complex(z, s),
        None => s.serialize_none(),
    }
}

/// Classifies the retained spectrum.
///
/// For autonomous systems the retained multiplier nearest 1 is the phase mode and is
/// excluded from the verdict; its distance from 1 is reported as a quality check.
pub fn stability_verdict(dec: &FloquetDecomposition, autonomous: bool, unit_tol: f64) -> Result<StabilityReport> {
    let retained: Vec<Complex64> = dec.retained().map(|m| m.value).collect();
    if retained.is_empty() {
        return Err(FloquetError::EmptySpectrum);
    }
    let one = Complex64::new(1.0, 0.0);
    let trivial_index = autonomous.then(|| {
        (0..retained.len())
            .min_by(|&a, &b| (retained[a] - one).norm().total_cmp(&(retained[b] - one).norm()))
            .expect("retained spectrum is not empty")
    });
    let others: Vec<f64> =
        retained.iter().enumerate().filter(|(i, _)| Some(*i) != trivial_index).map(|(_, m)| m.norm()).collect();
    let max_modulus = others.iter().copied().reduce(f64::max);
    let verdict = match max_modulus {
        Some(m) if m > 1.0 + unit_tol => Verdict::Unstable,
        Some(m) if m >= 1.0 - unit_tol => Verdict::Marginal,
        _ => Verdict::Stable,
    };
    let period = dec.period;
    let classes = retained
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let l = crate::floquet::exponent(mu, period);
            ExponentClass {
                multiplier: mu,
                real_part: l.re,
                imaginary_part: l.im,
                imaginary_spacing: 2.0 * PI / period,
                trivial: Some(i) == trivial_index,
            }
        })
        .collect();
    let trivial_multiplier = trivial_index.map(|i| retained[i]);
    Ok(StabilityReport {
        verdict,
        trivial_multiplier,
        phase_error: trivial_multiplier.map(|m| (m - one).norm()),
        max_modulus,
        unit_tolerance: unit_tol,
        classes,
    })
}

/// `|<r, y'>| / (||r|| ||y'||)` over all nodes: 1 when the mode is parallel to the cycle velocity.
///
/// Both must be sampled on the same number of nodes.
pub fn phase_mode_alignment(mode: &PeriodicMode, cycle: &LimitCycle) -> Option<f64> {
    let velocity = cycle.derivative();
    if velocity.len() != mode.samples.len() {
        return None;
    }
    let mut dot = Complex64::new(0.0, 0.0);
    let (mut rr, mut vv) = (0.0, 0.0);
    for (r, v) in mode.samples.iter().zip(&velocity) {
        for (a, b) in r.iter().zip(v.iter()) {
            dot += a.conj() * b;
            rr += a.norm_sqr();
            vv += b * b;
        }
    }
    let denom = (rr * vv).sqrt();
    (denom > 0.0).then(|| dot.norm() / denom)
}
