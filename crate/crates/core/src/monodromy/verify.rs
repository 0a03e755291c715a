use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::floquet::{FloquetDecomposition, PeriodicMode};
use crate::grid::PeriodicGrid;
use crate::interp;
use crate::monodromy::integrate::integrate_block;
use crate::monodromy::operator::{build_monodromy, identity_history};
use crate::quadrature;
use crate::system::LinearMemorySystem;

/// Smallest error estimate used when forming residual bounds.
const ESTIMATE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// `max_s ||X(s + T) - X(s) U||_F / ||X(s + T)||_F` over the nodes of one period.
    pub transition_residual: f64,
    pub mode_periodicity: Vec<f64>,
    /// Relative residual of `r' + lambda r - exp(-lambda s) L{exp(lambda s) r}` per mode.
    pub exponent_equation: Vec<f64>,
    pub error_estimate: f64,
    /// Ten times the error estimate.
    pub bound: f64,
    pub within_bound: bool,
}

impl VerificationReport {
    /// Largest of all reported residuals.
    pub fn worst(&self) -> f64 {
        self.mode_periodicity.iter().chain(&self.exponent_equation).fold(self.transition_residual, |a, b| a.max(*b))
    }
}

/// Checks `X(s + T) = X(s) U` on `[0, T]` and the periodic-factor equation of each mode.
///
/// Problems are reported as residuals rather than errors; only failures of the
/// underlying integration propagate.
pub fn verify_floquet_form(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    decomposition: &FloquetDecomposition,
) -> Result<VerificationReport> {
    let transition_residual = transition_residual(system, grid)?;
    let mode_periodicity: Vec<f64> = decomposition.modes.iter().map(|m| m.periodicity_residual).collect();
    let exponent_equation: Vec<f64> =
        decomposition.modes.iter().map(|m| exponent_equation_residual(system, grid, m, 1)).collect();
    let fd_estimate = decomposition
        .modes
        .iter()
        .map(|m| {
            let fine = exponent_equation_residual(system, grid, m, 1);
            let coarse = exponent_equation_residual(system, grid, m, 2);
            (coarse - fine).abs() / 15.0
        })
        .fold(0.0, f64::max);
    let mode_count = decomposition.modes.len();
    let multiplier_estimate =
        decomposition.retained().take(mode_count.max(1)).map(|m| m.refinement_error).fold(0.0, f64::max);
    let error_estimate = multiplier_estimate.max(fd_estimate).max(ESTIMATE_FLOOR);
    let bound = 10.0 * error_estimate;
    let within_bound = transition_residual <= bound
        && mode_periodicity.iter().all(|r| *r <= bound)
        && exponent_equation.iter().all(|r| *r <= bound);
    Ok(VerificationReport {
        transition_residual,
        mode_periodicity,
        exponent_equation,
        error_estimate,
        bound,
        within_bound,
    })
}

fn transition_residual(system: &LinearMemorySystem, grid: &PeriodicGrid) -> Result<f64> {
    let n = system.dimension();
    let nodes = grid.history_points() + 1;
    let samples = grid.samples();
    let u = build_monodromy(system, grid)?;
    let traj = integrate_block(&system.homogeneous(), grid, identity_history(n, nodes), 2 * samples, false)?;
    // Node j of the solution (stored at j + nh) times U versus node j + N.
    let nh = nodes - 1;
    let per_node: Vec<(f64, f64)> = (0..=nh + samples)
        .map(|idx| {
            let shifted = &traj[idx + samples];
            let diff = &traj[idx] * u.matrix() - shifted;
            (diff.norm_squared(), shifted.norm_squared())
        })
        .collect();
    let mut worst: f64 = 0.0;
    for k in 0..=samples {
        let (num, den) = per_node[k..k + nodes].iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        worst = worst.max((num / den.max(f64::MIN_POSITIVE)).sqrt());
    }
    Ok(worst)
}

fn periodic(samples: &[DVector<Complex64>]) -> &[DVector<Complex64>] {
    &samples[..samples.len() - 1]
}

/// Residual of the periodic-factor equation using every `stride`-th node of the mode.
pub fn exponent_equation_residual(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    mode: &PeriodicMode,
    stride: usize,
) -> f64 {
    let period = grid.period();
    let all = periodic(&mode.samples);
    let r: Vec<DVector<Complex64>> = all.iter().step_by(stride).cloned().collect();
    let len = r.len();
    let h = period / len as f64;
    let lambda = mode.exponent;
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let at = |t: f64| interp::periodic_complex(&r, period, t);
    let kernel_panels = if system.kernel().is_some() { grid.memory_depth() / h } else { 0.0 };
    let panels = (kernel_panels * (1.0 + 1e-12)).floor() as usize;
    let remainder = if kernel_panels - panels as f64 > 1e-9 { kernel_panels - panels as f64 } else { 0.0 };
    let w = quadrature::uniform_weights(panels);
    let gauss = quadrature::gauss_legendre(4);

    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..len {
        let s = i as f64 * h;
        let idx = |k: i64| (i as i64 + k).rem_euclid(len as i64) as usize;
        let dr = (&r[idx(-2)] - &r[idx(-1)] * Complex64::new(8.0, 0.0) + &r[idx(1)] * Complex64::new(8.0, 0.0)
            - &r[idx(2)])
            / Complex64::new(12.0 * h, 0.0);
        let mut lz = to_c(&system.coefficient(s)) * &r[i];
        for tap in system.delay_taps() {
            let back = (-lambda * tap.delay).exp();
            lz += to_c(&(tap.coefficient)(s)) * at(s - tap.delay) * back;
        }
        if let Some(k) = system.kernel() {
            for (j, wj) in w.iter().enumerate() {
                let u = j as f64 * h;
                let rz = &r[idx(-(j as i64))];
                lz += to_c(&k(s, s - u)) * rz * ((-lambda * u).exp() * (wj * h));
            }
            if remainder > 0.0 {
                let a = panels as f64 * h;
                let b = a + remainder * h;
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for (x, gw) in gauss.0.iter().zip(&gauss.1) {
                    let u = mid + half * x;
                    lz += to_c(&k(s, s - u)) * at(s - u) * ((-lambda * u).exp() * (gw * half));
                }
            }
        }
        let lr = &r[i] * lambda;
        let res = &dr + &lr - &lz;
        worst = worst.max(res.norm());
        scale = scale.max(dr.norm()).max(lr.norm()).max(r[i].norm());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}
