use nalgebra::{DMatrix, DVector};

use crate::error::{FloquetError, Result};
use crate::grid::{PeriodicGrid, StateSegment};
use crate::monodromy::integrate::{integrate_block, integrate_forced, span_steps, Trajectory};
use crate::system::LinearMemorySystem;

/// Solution of the forced system by direct integration.
pub fn forced_response(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    span: f64,
) -> Result<Trajectory> {
    integrate_forced(system, grid, initial, span)
}

/// `z(t) = X(t) [z(0) + int_0^t X(s)^{-1} b(s) ds]` for a memoryless system.
///
/// The fundamental matrix is integrated at half the grid step and the integral is
/// accumulated with Simpson's rule over each full step.
pub fn variation_of_constants(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &DVector<f64>,
    span: f64,
) -> Result<Vec<DVector<f64>>> {
    if !system.is_memoryless() {
        return Err(FloquetError::InvalidArgument(
            "variation of constants needs a square transition matrix (memoryless system)".into(),
        ));
    }
    let n = system.dimension();
    let steps = span_steps(span, grid.step())?;
    let fine = PeriodicGrid::new(grid.period(), 2 * grid.samples(), 0.0)?;
    let x = integrate_block(&system.homogeneous(), &fine, vec![DMatrix::identity(n, n)], 2 * steps, false)?;
    let hf = fine.step();
    let integrand = |k: usize| -> Result<DVector<f64>> {
        let b = system.forcing().map(|b| b(k as f64 * hf)).unwrap_or_else(|| DVector::zeros(n));
        let inv = x[k].clone().try_inverse().ok_or_else(|| FloquetError::Singular("fundamental matrix".into()))?;
        Ok(inv * b)
    };
    let mut acc = DVector::zeros(n);
    let mut out = vec![initial.clone()];
    let mut prev = integrand(0)?;
    for k in 0..steps {
        let mid = integrand(2 * k + 1)?;
        let end = integrand(2 * k + 2)?;
        acc += (&prev + &mid * 4.0 + &end) * (hf / 3.0);
        out.push(&x[2 * k + 2] * (initial + &acc));
        prev = end;
    }
    Ok(out)
}

/// Forced response together with its deviation from the variation-of-constants form.
///
/// The deviation is `None` for systems with memory, where the transition matrix is not square.
pub fn forced_response_checked(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    span: f64,
) -> Result<(Trajectory, Option<f64>)> {
    let traj = forced_response(system, grid, initial, span)?;
    if !system.is_memoryless() {
        return Ok((traj, None));
    }
    let voc = variation_of_constants(system, grid, initial.current(), span)?;
    let dev = traj.states().iter().zip(&voc).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    Ok((traj, Some(dev)))
}
