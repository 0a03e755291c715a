use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FloquetError, Result};
use crate::floquet::{compare_multipliers, exponent, FloquetDecomposition, Multiplier, PeriodicMode};
use crate::grid::PeriodicGrid;
use crate::linalg::{self, ComplexLu};
use crate::monodromy::integrate::integrate_block;
use crate::monodromy::operator::{build_monodromy, MonodromyOperator};
use crate::system::LinearMemorySystem;

/// Multipliers smaller than this fraction of the largest are treated as zero.
const ZERO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Relative distance within which a multiplier must reappear on the refined grid.
    pub match_tolerance: f64,
    /// Number of modes extracted, largest retained multipliers first.
    pub modes: usize,
    pub refinement: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { match_tolerance: 1e-4, modes: 8, refinement: 2 }
    }
}

/// Eigenvalues of `U` above the zero floor.
pub fn operator_spectrum(u: &MonodromyOperator) -> Result<Vec<Complex64>> {
    let vals = linalg::eigenvalues(u.matrix())?;
    let max = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(vals.into_iter().filter(|v| v.norm() > ZERO_FLOOR * max).collect())
}

/// Pairs every coarse multiplier with its nearest refined multiplier.
pub(crate) fn match_spectra(coarse: &[Complex64], fine: &[Complex64], period: f64, tolerance: f64) -> Vec<Multiplier> {
    let mut out: Vec<Multiplier> = coarse
        .iter()
        .map(|&mu| {
            let dist = fine.iter().map(|nu| (mu - nu).norm()).fold(f64::INFINITY, f64::min) / mu.norm();
            Multiplier {
                value: mu,
                exponent: exponent(mu, period),
                converged: dist <= tolerance,
                refinement_error: dist,
            }
        })
        .collect();
    out.sort_by(|a, b| compare_multipliers(&a.value, &b.value));
    out
}

pub fn floquet_spectrum(system: &LinearMemorySystem, grid: &PeriodicGrid) -> Result<FloquetDecomposition> {
    floquet_spectrum_with(system, grid, &SpectrumOptions::default())
}

/// Two-grid Floquet spectrum with modes for the leading retained multipliers.
pub fn floquet_spectrum_with(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    options: &SpectrumOptions,
) -> Result<FloquetDecomposition> {
    let u = build_monodromy(system, grid)?;
    let coarse = operator_spectrum(&u)?;
    let fine_grid = grid.refined(options.refinement.max(2))?;
    let fine = operator_spectrum(&build_monodromy(system, &fine_grid)?)?;
    let multipliers = match_spectra(&coarse, &fine, grid.period(), options.match_tolerance);
    let retained: Vec<Complex64> = multipliers.iter().filter(|m| m.converged).map(|m| m.value).collect();
    if retained.is_empty() {
        return Err(FloquetError::NoConvergedMultipliers { candidates: multipliers.len(), samples: grid.samples() });
    }
    log::debug!("{} of {} multipliers retained at N = {}", retained.len(), multipliers.len(), grid.samples());
    let modes = retained
        .par_iter()
        .take(options.modes)
        .map(|&mu| extract_mode(&u, mu, system, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(FloquetDecomposition { period: grid.period(), samples: grid.samples(), multipliers, modes })
}

/// Eigenvector of `U` for `mu` by inverse iteration, with its relative residual.
pub fn eigenvector(u: &DMatrix<f64>, mu: Complex64) -> Result<(DVector<Complex64>, f64)> {
    let m = u.nrows();
    let scale = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut shift = mu;
    let mut lu = None;
    for k in 0..8 {
        let a = DMatrix::from_fn(m, m, |i, j| {
            Complex64::new(u[(i, j)], 0.0) - if i == j { shift } else { Complex64::new(0.0, 0.0) }
        });
        match ComplexLu::new(&a) {
            Ok(f) => {
                lu = Some(f);
                break;
            }
            Err(_) => {
                shift = mu + Complex64::new(1.0, 0.5) * (scale * 1e-13 * 10f64.powi(k));
            }
        }
    }
    let lu = lu.ok_or_else(|| FloquetError::Singular("shifted monodromy operator".into()))?;
    let mut x =
        DVector::from_fn(m, |i, _| Complex64::new(1.0 + 0.25 * ((i + 1) as f64).sin(), 0.1 * ((i + 1) as f64).cos()));
    x /= Complex64::new(x.norm(), 0.0);
    for _ in 0..4 {
        let y = lu.solve(&x);
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        x = y / Complex64::new(norm, 0.0);
    }
    let ux = DVector::from_fn(m, |i, _| (0..m).map(|j| x[j] * u[(i, j)]).sum::<Complex64>());
    let residual = (ux - &x * mu).norm() / scale;
    Ok((x, residual))
}

/// Periodic factor of the Floquet solution belonging to the eigenvalue `mu` of `U`.
pub fn extract_mode(
    u: &MonodromyOperator,
    mu: Complex64,
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
) -> Result<PeriodicMode> {
    let (x, residual) = eigenvector(u.matrix(), mu)?;
    if residual > 1e-8 {
        return Err(FloquetError::NotAnEigenvalue { mu, distance: residual });
    }
    let n = system.dimension();
    let nodes = grid.history_points() + 1;
    let history: Vec<DMatrix<f64>> = (0..nodes)
        .map(|i| {
            DMatrix::from_fn(n, 2, |c, part| {
                let v = x[i * n + c];
                if part == 0 {
                    v.re
                } else {
                    v.im
                }
            })
        })
        .collect();
    let traj = integrate_block(&system.homogeneous(), grid, history, grid.samples(), false)?;
    let lambda = exponent(mu, grid.period());
    let h = grid.step();
    let mut samples: Vec<DVector<Complex64>> = traj[nodes - 1..]
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let damp = (-lambda * (k as f64 * h)).exp();
            DVector::from_fn(n, |c, _| Complex64::new(b[(c, 0)], b[(c, 1)]) * damp)
        })
        .collect();
    normalize_mode(&mut samples);
    let residual = (&samples[samples.len() - 1] - &samples[0]).norm();
    Ok(PeriodicMode { multiplier: mu, exponent: lambda, samples, periodicity_residual: residual })
}

/// Scales to unit maximum node norm and makes the largest component of the first
/// maximal node real and positive.
pub(crate) fn normalize_mode(samples: &mut [DVector<Complex64>]) {
    let max = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let at = samples.iter().position(|s| s.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
    let node = &samples[at];
    let mut big = 0;
    for (c, v) in node.iter().enumerate() {
        if v.norm() > node[big].norm() * (1.0 + 1e-12) {
            big = c;
        }
    }
    let phase = node[big] / node[big].norm();
    let factor = phase.conj() / max;
    for s in samples.iter_mut() {
        *s *= factor;
    }
}
