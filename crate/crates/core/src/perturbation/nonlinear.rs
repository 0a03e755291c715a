use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FloquetError, Result};
use crate::grid::PeriodicGrid;
use crate::interp;
use crate::quadrature;
use crate::system::{sampled_table, validate_system, KernelFn, LinearMemorySystem, MatrixFn};

pub type FieldFn = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;

/// Allowed mismatch between the first and last cycle samples.
pub const WRAP_TOL: f64 = 1e-8;

/// `y'(t) = f(y, t) + sum_i C_i(t) g(y(t - d_i), t - d_i) + int_{t-r}^{t} K(t, s) g(y(s), s) ds`.
#[derive(Clone)]
pub struct NonlinearMemorySystem {
    dimension: usize,
    field: FieldFn,
    memory_field: Option<FieldFn>,
    taps: Vec<(f64, MatrixFn)>,
    kernel: Option<KernelFn>,
    memory_depth: f64,
}

impl fmt::Debug for NonlinearMemorySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearMemorySystem")
            .field("dimension", &self.dimension)
            .field("delays", &self.taps.iter().map(|t| t.0).collect::<Vec<_>>())
            .field("kernel", &self.kernel.is_some())
            .field("memory_depth", &self.memory_depth)
            .finish()
    }
}

impl NonlinearMemorySystem {
    pub fn new(dimension: usize, field: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            dimension,
            field: Arc::new(field),
            memory_field: None,
            taps: Vec::new(),
            kernel: None,
            memory_depth: 0.0,
        }
    }

    pub fn with_memory_field(mut self, g: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.memory_field = Some(Arc::new(g));
        self
    }

    pub fn with_delay_tap(mut self, delay: f64, c: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.taps.push((delay, Arc::new(c)));
        self.memory_depth = self.memory_depth.max(delay);
        self
    }

    pub fn with_kernel(mut self, depth: f64, k: impl Fn(f64, f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.kernel = Some(Arc::new(k));
        self.memory_depth = self.memory_depth.max(depth);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn memory_depth(&self) -> f64 {
        self.memory_depth
    }

    pub fn field(&self, y: &DVector<f64>, t: f64) -> DVector<f64> {
        (self.field)(y, t)
    }

    fn memory_value(&self, y: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.memory_field {
            Some(g) => g(y, t),
            None => y.clone(),
        }
    }

    pub fn is_memoryless(&self) -> bool {
        self.taps.is_empty() && self.kernel.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSource {
    UserSupplied,
    ExternallyComputed,
}

/// Samples of a periodic solution on `samples + 1` uniform nodes of `[0, period]`.
#[derive(Debug, Clone)]
pub struct LimitCycle {
    period: f64,
    samples: Vec<DVector<f64>>,
    source: CycleSource,
    wrap_residual: f64,
}

impl LimitCycle {
    pub fn new(period: f64, samples: Vec<DVector<f64>>, source: CycleSource) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("cycle period must be positive, got {period}")));
        }
        if samples.len() < 9 {
            return Err(FloquetError::InvalidArgument(format!(
                "cycle needs at least 9 samples, got {}",
                samples.len()
            )));
        }
        let n = samples[0].len();
        if n == 0 || samples.iter().any(|s| s.len() != n) {
            return Err(FloquetError::InvalidArgument("cycle samples differ in dimension".into()));
        }
        if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(FloquetError::InvalidArgument("cycle samples are not finite".into()));
        }
        let scale = samples.iter().map(|s| s.amax()).fold(1.0, f64::max);
        let wrap_residual = (&samples[samples.len() - 1] - &samples[0]).amax() / scale;
        if wrap_residual > WRAP_TOL {
            return Err(FloquetError::CycleNotClosed { residual: wrap_residual, tolerance: WRAP_TOL });
        }
        Ok(Self { period, samples, source, wrap_residual })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of intervals `N`; the cycle stores `N + 1` samples.
    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn dimension(&self) -> usize {
        self.samples[0].len()
    }

    pub fn source(&self) -> CycleSource {
        self.source
    }

    pub fn wrap_residual(&self) -> f64 {
        self.wrap_residual
    }

    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.amax()).fold(0.0, f64::max)
    }

    fn periodic(&self) -> &[DVector<f64>] {
        &self.samples[..self.samples.len() - 1]
    }

    /// State at any time, by periodic cubic interpolation.
    pub fn state(&self, t: f64) -> DVector<f64> {
        interp::periodic_vector(self.periodic(), self.period, t)
    }

    /// Time derivative at the nodes by eighth-order periodic central differences.
    pub fn derivative(&self) -> Vec<DVector<f64>> {
        const STENCIL: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let p = self.periodic();
        let len = p.len() as i64;
        let h = self.period / len as f64;
        let at = |k: i64| &p[k.rem_euclid(len) as usize];
        (0..=len)
            .map(|k| {
                let mut d = DVector::zeros(self.dimension());
                for (j, c) in STENCIL.iter().enumerate() {
                    let o = j as i64 + 1;
                    d += (at(k + o) - at(k - o)) * *c;
                }
                d / h
            })
            .collect()
    }

    /// Largest node residual of the system equation, relative to `max(1, ||y'||)`.
    pub fn residual(&self, system: &NonlinearMemorySystem) -> f64 {
        let p = self.periodic();
        let len = p.len();
        let h = self.period / len as f64;
        let deriv = self.derivative();
        let g = |t: f64| system.memory_value(&self.state(t), t);
        let panels = (system.memory_depth / h).round() as usize;
        let w = quadrature::uniform_weights(panels);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for (k, yk) in p.iter().enumerate() {
            let t = k as f64 * h;
            let mut rhs = system.field(yk, t);
            for (d, c) in &system.taps {
                rhs += c(t) * g(t - d);
            }
            if let Some(kern) = &system.kernel {
                for (j, wj) in w.iter().enumerate() {
                    let s = t - j as f64 * h;
                    rhs += kern(t, s) * g(s) * (wj * h);
                }
            }
            worst = worst.max((&deriv[k] - rhs).amax());
            scale = scale.max(deriv[k].amax());
        }
        worst / scale
    }
}

/// Central-difference Jacobian with per-component step `fd_step * (1 + |y_i|)`.
pub fn jacobian(
    f: &dyn Fn(&DVector<f64>, f64) -> DVector<f64>,
    y: &DVector<f64>,
    t: f64,
    fd_step: f64,
) -> DMatrix<f64> {
    let n = y.len();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let step = fd_step * (1.0 + y[i].abs());
        let mut plus = y.clone();
        plus[i] += step;
        let mut minus = y.clone();
        minus[i] -= step;
        cols.push((f(&plus, t) - f(&minus, t)) / (2.0 * step));
    }
    DMatrix::from_columns(&cols)
}

fn jacobian_table(
    f: &dyn Fn(&DVector<f64>, f64) -> DVector<f64>,
    cycle: &LimitCycle,
    fd_step: f64,
    what: &str,
) -> Result<Vec<DMatrix<f64>>> {
    let h = cycle.period() / cycle.intervals() as f64;
    cycle
        .periodic()
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let t = k as f64 * h;
            let j = jacobian(f, y, t, fd_step);
            if j.iter().any(|v| !v.is_finite()) {
                return Err(FloquetError::InvalidSystem { reason: format!("{what} Jacobian is not finite"), node: t });
            }
            Ok(j)
        })
        .collect()
}

/// Linear variational system about a limit cycle.
///
/// Jacobians are taken at the cycle nodes and interpolated periodically in between.
/// Memory terms become `C_i(t) B(t - d_i)` for delays and `K(t, s) B(s)` for the kernel.
pub fn linearize(system: &NonlinearMemorySystem, cycle: &LimitCycle, fd_step: f64) -> Result<LinearMemorySystem> {
    let n = system.dimension();
    if cycle.dimension() != n {
        return Err(FloquetError::InvalidArgument(format!(
            "cycle dimension {} does not match system dimension {n}",
            cycle.dimension()
        )));
    }
    let limit = 1e-2 * cycle.max_norm().max(1.0);
    if !(fd_step > 0.0 && fd_step <= limit) {
        return Err(FloquetError::InvalidArgument(format!("fd_step must lie in (0, {limit:.3e}], got {fd_step}")));
    }
    let residual = cycle.residual(system);
    if residual > 1e-6 {
        log::warn!("limit cycle residual {residual:.3e} is large; the linearization may be inaccurate");
    }
    let period = cycle.period();
    let a = sampled_table(period, jacobian_table(system.field.as_ref(), cycle, fd_step, "field")?)?;
    let aa = a.clone();
    let mut linear = LinearMemorySystem::new(n, move |t| aa(t));
    if !system.is_memoryless() {
        let g: &dyn Fn(&DVector<f64>, f64) -> DVector<f64> = match &system.memory_field {
            Some(g) => g.as_ref(),
            None => &|y: &DVector<f64>, _| y.clone(),
        };
        let b = sampled_table(period, jacobian_table(g, cycle, fd_step, "memory field")?)?;
        for (d, c) in &system.taps {
            let (d, c, b) = (*d, c.clone(), b.clone());
            linear = linear.with_delay_tap(d, move |t| c(t) * b(t - d));
        }
        if let Some(k) = &system.kernel {
            let (k, b) = (k.clone(), b.clone());
            linear = linear.with_kernel(move |t, s| k(t, s) * b(s));
        }
    }
    let grid = PeriodicGrid::new(period, cycle.intervals().max(crate::grid::MIN_SAMPLES), system.memory_depth())?;
    let report = validate_system(&linear, &grid)?;
    if !report.passed {
        return Err(FloquetError::InvalidSystem {
            reason: format!(
                "linearized system is not periodic (coefficient residual {:.3e}, kernel residual {:.3e})",
                report.coefficient_residual, report.kernel_residual
            ),
            node: report.coefficient_worst_node,
        });
    }
    Ok(linear)
}
