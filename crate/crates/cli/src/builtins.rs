//! Systems, vector fields and potentials named in configuration files.

use std::f64::consts::PI;
use std::sync::Arc;

use gfloquet::bloch::NonlocalPotential1D;
use gfloquet::monodromy::{truncate_infinite_kernel, Truncation};
use gfloquet::perturbation::NonlinearMemorySystem;
use gfloquet::system::MatrixFn;
use gfloquet::{sampled_table, LinearMemorySystem};
use nalgebra::{DMatrix, DVector};

use crate::config::{FieldSpec, KernelSpec, MatrixRows, MatrixSpec, PotentialSpec, SeparableSpec, SystemSpec};
use crate::CliError;

pub struct PreparedSystem {
    pub name: &'static str,
    pub system: LinearMemorySystem,
    pub period: f64,
    pub memory_depth: f64,
    pub truncation: Option<Truncation>,
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn positive(value: f64, what: &str) -> Result<f64, CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::Config(format!("{what} must be positive and finite, got {value}")))
    }
}

fn matrix(rows: &MatrixRows, n: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{what} must be a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_fn(spec: &MatrixSpec, n: usize, period: f64, what: &str) -> Result<MatrixFn, CliError> {
    match spec {
        MatrixSpec::Constant(rows) => {
            let m = matrix(rows, n, what)?;
            Ok(Arc::new(move |_| m.clone()))
        }
        MatrixSpec::Table(entries) => {
            let mats = entries
                .iter()
                .enumerate()
                .map(|(j, rows)| matrix(rows, n, &format!("{what} sample {j}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(sampled_table(period, mats)?)
        }
        MatrixSpec::Fourier { mean, cos, sin } => {
            let mean = matrix(mean, n, &format!("{what} mean"))?;
            let cos = cos
                .iter()
                .enumerate()
                .map(|(k, rows)| matrix(rows, n, &format!("{what} cos[{k}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let sin = sin
                .iter()
                .enumerate()
                .map(|(k, rows)| matrix(rows, n, &format!("{what} sin[{k}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Arc::new(move |s| {
                let w = 2.0 * PI * s / period;
                let mut m = mean.clone();
                for (k, c) in cos.iter().enumerate() {
                    m += c * ((k + 1) as f64 * w).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    m += c * ((k + 1) as f64 * w).sin();
                }
                m
            }))
        }
    }
}

/// Builds the linear system of an `analyze` config; `samples` aligns kernel truncation with the grid.
pub fn linear_system(spec: &SystemSpec, samples: usize) -> Result<PreparedSystem, CliError> {
    match spec {
        &SystemSpec::ScalarCosine { alpha, beta, period } => {
            let period = positive(period, "period")?;
            let system = LinearMemorySystem::new(1, move |s| scalar(alpha + beta * (2.0 * PI * s / period).cos()));
            Ok(PreparedSystem { name: "scalar_cosine", system, period, memory_depth: 0.0, truncation: None })
        }
        SystemSpec::DelayPiOver2 {} => {
            let system = LinearMemorySystem::zero(1).with_delay_tap(1.0, |_| scalar(-PI / 2.0));
            Ok(PreparedSystem { name: "delay_pi_over_2", system, period: 1.0, memory_depth: 1.0, truncation: None })
        }
        &SystemSpec::ExpKernel { a0, a1, b, theta, epsilon } => {
            let theta = positive(theta, "theta")?;
            let kernel = move |s: f64, t: f64| scalar(b * (-(s - t) / theta).exp());
            let tr = truncate_infinite_kernel(&kernel, &|_| 1.0, 1.0, samples, epsilon)?;
            let system =
                LinearMemorySystem::new(1, move |s| scalar(a0 + a1 * (2.0 * PI * s).cos())).with_kernel(kernel);
            Ok(PreparedSystem { name: "exp_kernel", system, period: 1.0, memory_depth: tr.depth, truncation: Some(tr) })
        }
        &SystemSpec::Mathieu { delta, epsilon } => {
            let system = LinearMemorySystem::new(2, move |s| {
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(delta + epsilon * s.cos()), 0.0])
            });
            Ok(PreparedSystem { name: "mathieu", system, period: 2.0 * PI, memory_depth: 0.0, truncation: None })
        }
        SystemSpec::Custom { dimension, period, memory_depth, coefficient, delay_taps, kernel } => {
            let n = *dimension;
            if n == 0 {
                return Err(CliError::Config("dimension must be at least 1".into()));
            }
            let period = positive(*period, "period")?;
            let a = matrix_fn(coefficient, n, period, "coefficient")?;
            let mut system = LinearMemorySystem::new(n, move |s| a(s));
            let mut depth: f64 = 0.0;
            for (i, tap) in delay_taps.iter().enumerate() {
                let delay = positive(tap.delay, &format!("delay_taps[{i}].delay"))?;
                let c = matrix_fn(&tap.coefficient, n, period, &format!("delay_taps[{i}].coefficient"))?;
                system = system.with_delay_tap(delay, move |s| c(s));
                depth = depth.max(delay);
            }
            let mut truncation = None;
            if let Some(KernelSpec::Exponential { matrix: rows, decay_time, epsilon }) = kernel {
                let m = matrix(rows, n, "kernel.matrix")?;
                let theta = positive(*decay_time, "kernel.decay_time")?;
                let k = move |s: f64, t: f64| &m * (-(s - t) / theta).exp();
                if memory_depth.is_none() {
                    let tr = truncate_infinite_kernel(&k, &|_| 1.0, period, samples, *epsilon)?;
                    depth = depth.max(tr.depth);
                    truncation = Some(tr);
                }
                system = system.with_kernel(k);
            }
            let memory_depth = match memory_depth {
                Some(d) if !(d.is_finite() && *d >= 0.0) => {
                    return Err(CliError::Config(format!("memory_depth must be non-negative, got {d}")))
                }
                Some(d) => *d,
                None => depth,
            };
            Ok(PreparedSystem { name: "custom", system, period, memory_depth, truncation })
        }
    }
}

pub struct PreparedField {
    pub name: &'static str,
    pub system: NonlinearMemorySystem,
    pub autonomous: bool,
}

fn linear_stable_matrix(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-0.5 + 0.3 * (2.0 * PI * t).cos(), 1.0, -1.0, -0.5])
}

pub fn nonlinear_system(spec: &FieldSpec) -> PreparedField {
    match *spec {
        FieldSpec::VanDerPol { mu } => PreparedField {
            name: "van_der_pol",
            system: NonlinearMemorySystem::new(2, move |y, _| {
                DVector::from_vec(vec![y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]])
            }),
            autonomous: true,
        },
        FieldSpec::LinearStable {} => PreparedField {
            name: "linear_stable",
            system: NonlinearMemorySystem::new(2, |y, t| linear_stable_matrix(t) * y),
            autonomous: false,
        },
    }
}

fn rk4_step(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, y: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (h / 2.0)));
    let k3 = f(&(y + &k2 * (h / 2.0)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn rk4(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, mut y: DVector<f64>, span: f64, steps: usize) -> DVector<f64> {
    let h = span / steps as f64;
    for _ in 0..steps {
        y = rk4_step(f, &y, h);
    }
    y
}

/// The van der Pol cycle by long RK4 integration, starting on the section `y2 = 0, y1 > 0`.
fn van_der_pol_cycle(mu: f64, intervals: usize) -> Result<(f64, Vec<DVector<f64>>), CliError> {
    let f = move |y: &DVector<f64>| DVector::from_vec(vec![y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]]);
    let dt = 1e-3;
    let y = rk4(&f, DVector::from_vec(vec![2.0, 0.0]), 200.0, 200_000);
    let crossing = |mut y: DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let mut t = 0.0;
        while t < 1e3 {
            let next = rk4_step(&f, &y, dt);
            if y[1] > 0.0 && next[1] <= 0.0 && t > 10.0 * dt {
                let mut tau = dt * y[1] / (y[1] - next[1]);
                for _ in 0..20 {
                    let z = rk4_step(&f, &y, tau);
                    tau -= z[1] / f(&z)[1];
                }
                return Some((t + tau, rk4_step(&f, &y, tau)));
            }
            y = next;
            t += dt;
        }
        None
    };
    let missing = || CliError::Config(format!("van der Pol orbit with mu = {mu} does not cross its section"));
    let (_, start) = crossing(y).ok_or_else(missing)?;
    let (period, _) = crossing(start.clone()).ok_or_else(missing)?;
    let h = period / intervals as f64;
    let sub = (h / dt).ceil() as usize;
    let mut samples = vec![start.clone()];
    let mut cur = start;
    for _ in 0..intervals {
        cur = rk4(&f, cur, h, sub);
        samples.push(cur.clone());
    }
    Ok((period, samples))
}

/// Period and `intervals + 1` samples of the builtin's own periodic solution.
pub fn builtin_cycle(spec: &FieldSpec, intervals: usize) -> Result<(f64, Vec<DVector<f64>>), CliError> {
    if intervals < 8 {
        return Err(CliError::Config(format!("cycle_samples must be at least 8, got {intervals}")));
    }
    match *spec {
        FieldSpec::VanDerPol { mu } => {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(CliError::Config(format!("mu must be positive for a limit cycle, got {mu}")));
            }
            van_der_pol_cycle(mu, intervals)
        }
        FieldSpec::LinearStable {} => Ok((1.0, vec![DVector::zeros(2); intervals + 1])),
    }
}

fn with_separable(pot: NonlocalPotential1D, spec: &SeparableSpec) -> Result<NonlocalPotential1D, CliError> {
    let range = positive(spec.range, "range")?;
    let (lattice, gamma, m) = (pot.lattice(), spec.gamma, spec.modulation);
    let w = move |x: f64| 1.0 + m * (2.0 * PI * x / lattice).cos();
    Ok(pot.with_kernel(range, move |x, y| gamma * w(x) * w(y))?)
}

pub fn potential(spec: &PotentialSpec) -> Result<NonlocalPotential1D, CliError> {
    match spec {
        &PotentialSpec::Free { lattice } => Ok(NonlocalPotential1D::free(lattice)?),
        &PotentialSpec::KronigPenney { strength, lattice } => {
            Ok(NonlocalPotential1D::kronig_penney(strength, lattice)?)
        }
        &PotentialSpec::SeparableNonlocal { lattice, gamma, range, modulation } => {
            with_separable(NonlocalPotential1D::free(lattice)?, &SeparableSpec { gamma, range, modulation })
        }
        PotentialSpec::Table { lattice, values, delta_strength, separable } => {
            let lattice = positive(*lattice, "lattice")?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config("potential table has non-finite values".into()));
            }
            let table = sampled_table(lattice, values.iter().map(|&v| scalar(v)).collect())?;
            let mut pot =
                NonlocalPotential1D::new(lattice, move |x| table(x)[(0, 0)])?.with_delta_comb(*delta_strength);
            if let Some(sep) = separable {
                pot = with_separable(pot, sep)?;
            }
            Ok(pot)
        }
    }
}
