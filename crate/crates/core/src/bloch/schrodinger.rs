use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::potential::NonlocalPotential1D;
use crate::error::{FloquetError, Result};
use crate::grid::PeriodicGrid;
use crate::interp::cubic_weights;
use crate::monodromy::build_monodromy;
use crate::monodromy::integrate::integrate_block;
use crate::quadrature;
use crate::system::{LinearMemorySystem, VectorFn};

pub const RELAXATION: f64 = 0.5;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;

fn check_grid(pot: &NonlocalPotential1D, grid: &PeriodicGrid) -> Result<()> {
    let a = pot.lattice();
    if (grid.period() - a).abs() > 1e-12 * a {
        return Err(FloquetError::InvalidGrid(format!(
            "grid period {} differs from lattice constant {a}",
            grid.period()
        )));
    }
    Ok(())
}

/// Stationary Schrödinger equation as a first-order system in `x` with state `(psi, psi')`.
///
/// Only the causal half of the nonlocal term (`x' <= x`) fits the memory form; the
/// anticausal half enters [`fixed_point_monodromy`] as a self-consistent forcing. The
/// delta comb is not part of the returned system and acts through [`comb_jump`].
pub fn schrodinger_system(pot: &NonlocalPotential1D, energy: f64, grid: &PeriodicGrid) -> Result<LinearMemorySystem> {
    check_grid(pot, grid)?;
    if !energy.is_finite() {
        return Err(FloquetError::InvalidArgument(format!("energy must be finite, got {energy}")));
    }
    let p = pot.clone();
    let mut sys =
        LinearMemorySystem::new(2, move |x| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, p.local(x) - energy, 0.0]));
    if !pot.is_local() {
        let range = pot.kernel_range();
        if range > grid.memory_depth() * (1.0 + 1e-12) {
            return Err(FloquetError::DelayBeyondMemory { delay: range, depth: grid.memory_depth() });
        }
        let p = pot.clone();
        sys = sys.with_kernel(move |x, y| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, p.kernel(x, y), 0.0]));
    }
    Ok(sys)
}

/// Jump of `(psi, psi')` across one comb tooth.
pub fn comb_jump(pot: &NonlocalPotential1D) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, pot.delta_strength(), 1.0])
}

/// One-cell transfer matrix of a local potential, comb tooth at the cell start included.
pub fn local_transfer(pot: &NonlocalPotential1D, energy: f64, samples: usize) -> Result<DMatrix<f64>> {
    if !pot.is_local() {
        return Err(FloquetError::InvalidArgument("transfer matrix needs a local potential".into()));
    }
    let grid = PeriodicGrid::new(pot.lattice(), samples, 0.0)?;
    let u = build_monodromy(&schrodinger_system(pot, energy, &grid)?, &grid)?;
    Ok(comb_jump(pot) * u.matrix())
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointMonodromy {
    /// `M(mu)`: maps `(psi, psi')(0+)` to `(psi, psi')(a+)` for the Bloch-extended solution.
    #[serde(skip)]
    pub matrix: DMatrix<Complex64>,
    /// `sigma_min(M - mu I) / max(1, |M|)`; small exactly when `mu` is a multiplier.
    pub residual: f64,
    pub iterations: usize,
    /// Ratio of the last two successive update norms.
    pub contraction: f64,
}

/// Cubic interpolation on `[0, a]` from nodes `0..=N`, one-sided near the ends.
fn cell_value(cell: &[Complex64], pos: f64) -> Complex64 {
    let last = cell.len() as i64 - 1;
    let i = pos.floor() as i64;
    if (pos - pos.round()).abs() < 1e-9 {
        return cell[(pos.round() as i64).clamp(0, last) as usize];
    }
    let start = (i - 1).clamp(0, last - 3);
    let w = cubic_weights(pos - start as f64);
    (0..4).map(|k| cell[(start + k as i64) as usize] * w[k]).sum()
}

/// `psi(x)` of the Bloch wave `psi(x + a) = mu psi(x)` built from one cell.
fn extended(cell: &[Complex64], mu: Complex64, samples: usize, pos: f64) -> Complex64 {
    let n = samples as f64;
    let mut k = (pos / n).floor();
    let mut local = pos - k * n;
    if local > n - 1e-9 {
        k += 1.0;
        local -= n;
    }
    mu.powi(k as i32) * cell_value(cell, local.max(0.0))
}

/// Transfer matrix `M(mu)` of the nonlocal problem by self-consistent forward solves.
///
/// For each initial state the cell solution is iterated: history and the anticausal part
/// of the kernel integral are taken from the Bloch extension of the previous iterate,
/// the causal part is handled by the memory integrator, and updates are relaxed by
/// [`RELAXATION`].
pub fn fixed_point_monodromy(
    pot: &NonlocalPotential1D,
    energy: f64,
    mu: Complex64,
    grid: &PeriodicGrid,
) -> Result<FixedPointMonodromy> {
    check_grid(pot, grid)?;
    if !(mu.norm() > 0.0 && mu.norm().is_finite()) {
        return Err(FloquetError::InvalidArgument(format!("multiplier must be finite and nonzero, got {mu}")));
    }
    let jump = comb_jump(pot).map(|v| Complex64::new(v, 0.0));
    let ident = DMatrix::<Complex64>::identity(2, 2);
    let finish = |z: DMatrix<Complex64>, iterations: usize, contraction: f64| {
        let m = &jump * z;
        let sv = (&m - &ident * mu).singular_values();
        let residual = sv.min() / m.norm().max(1.0);
        FixedPointMonodromy { matrix: m, residual, iterations, contraction }
    };
    if pot.is_local() {
        let t = local_transfer(pot, energy, grid.samples())?;
        return Ok(finish(t.map(|v| Complex64::new(v, 0.0)), 0, 0.0));
    }

    let n = grid.samples();
    let h = grid.step();
    let range = pot.kernel_range();
    let fp_grid = PeriodicGrid::new(pot.lattice(), n, range)?;
    let sys = schrodinger_system(pot, energy, &fp_grid)?;
    let nh = fp_grid.history_points();
    let reach = 2.0 * range / h;
    let panels = (reach * (1.0 + 1e-12)).floor() as usize;
    let leftover = (reach - panels as f64).max(0.0);
    let weights = quadrature::uniform_weights(panels);
    let half_count = 2 * n + panels + 2;

    // Anticausal integral int_x^{x+r} W(x, x') psi(x') dx' at every half node of the cell.
    let anticausal = |cell: &[Complex64]| -> Vec<Complex64> {
        let psi: Vec<Complex64> = (0..half_count).map(|q| extended(cell, mu, n, q as f64 / 2.0)).collect();
        (0..=2 * n)
            .map(|m| {
                let x = m as f64 * h / 2.0;
                let mut acc: Complex64 =
                    (0..=panels).map(|l| psi[m + l] * (weights[l] * pot.kernel(x, (m + l) as f64 * h / 2.0))).sum();
                acc *= h / 2.0;
                if leftover > 1e-9 {
                    let (y0, y1) = ((m + panels) as f64 * h / 2.0, x + range);
                    let end = extended(cell, mu, n, y1 / h);
                    acc += (psi[m + panels] * pot.kernel(x, y0) + end * pot.kernel(x, y1)) * (0.5 * (y1 - y0));
                }
                acc
            })
            .collect()
    };

    let solve = |cell: &[Complex64], z0: &DVector<f64>| -> Result<(Vec<Complex64>, DVector<Complex64>)> {
        let forcing = anticausal(cell);
        let mut parts = Vec::with_capacity(2);
        for imag in [false, true] {
            let pick = |c: Complex64| if imag { c.im } else { c.re };
            let table: Vec<f64> = forcing.iter().map(|&c| pick(c)).collect();
            let f: VectorFn = Arc::new(move |x: f64| {
                let m = ((2.0 * x / h).round() as usize).min(table.len() - 1);
                DVector::from_vec(vec![0.0, table[m]])
            });
            let history: Vec<DMatrix<f64>> = (0..=nh)
                .map(|i| {
                    let pos = i as f64 - nh as f64;
                    if i == nh {
                        let v = if imag { 0.0 } else { 1.0 };
                        DMatrix::from_column_slice(2, 1, &[v * z0[0], v * z0[1]])
                    } else {
                        DMatrix::from_column_slice(2, 1, &[pick(extended(cell, mu, n, pos)), 0.0])
                    }
                })
                .collect();
            parts.push(integrate_block(&sys.clone().with_forcing_fn(Some(f)), &fp_grid, history, n, true)?);
        }
        let node = |k: usize, c: usize| Complex64::new(parts[0][nh + k][(c, 0)], parts[1][nh + k][(c, 0)]);
        let cell = (0..=n).map(|k| node(k, 0)).collect();
        let end = DVector::from_vec(vec![node(n, 0), node(n, 1)]);
        Ok((cell, end))
    };

    let mut ends = Vec::with_capacity(2);
    let (mut iterations, mut contraction) = (0, 0.0);
    for col in 0..2 {
        let z0 = DVector::from_fn(2, |i, _| if i == col { 1.0 } else { 0.0 });
        let mut cell = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut prev_update = f64::INFINITY;
        let mut converged = None;
        for it in 1..=MAX_ITERATIONS {
            let (next, end) = solve(&cell, &z0)?;
            let update = next.iter().zip(&cell).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = next.iter().map(|c| c.norm()).fold(1.0, f64::max);
            if it > 1 {
                contraction = update / prev_update;
            }
            if !update.is_finite() || update > 1e12 * scale {
                return Err(FloquetError::NonConvergent { iterations: it, contraction });
            }
            if update <= FIXED_POINT_TOL * scale {
                iterations = iterations.max(it);
                converged = Some(end);
                break;
            }
            for (c, v) in cell.iter_mut().zip(&next) {
                *c += (v - *c) * RELAXATION;
            }
            prev_update = update;
        }
        match converged {
            Some(end) => ends.push(end),
            None => return Err(FloquetError::NonConvergent { iterations: MAX_ITERATIONS, contraction }),
        }
    }
    Ok(finish(DMatrix::from_columns(&ends), iterations, contraction))
}
