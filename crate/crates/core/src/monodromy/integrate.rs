//! Fixed-step RK4 integration of memory systems by the method of steps.
//!
//! All right-hand-side contributions other than `A(s) z(s)` and the kernel weight at
//! `t = s` refer only to already-computed nodes, so each stage reduces to
//! `F(Y) = M Y + G` with `M` and `G` fixed per stage time.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{FloquetError, Result};
use crate::grid::{PeriodicGrid, StateSegment};
use crate::interp::{add_scaled, snap};
use crate::quadrature;
use crate::system::LinearMemorySystem;

/// Samples of a solution on the nodes of `[0, span]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    step: f64,
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|k| k as f64 * self.step).collect()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Number of steps of size `h` in `span`, or an error if it is not a positive multiple.
pub(crate) fn span_steps(span: f64, h: f64) -> Result<usize> {
    let ratio = span / h;
    let steps = ratio.round();
    if !(span.is_finite() && steps >= 1.0 && (ratio - steps).abs() <= 1e-9 * steps) {
        return Err(FloquetError::SpanNotMultiple { span, step: h });
    }
    Ok(steps as usize)
}

pub(crate) fn check_delays(system: &LinearMemorySystem, grid: &PeriodicGrid) -> Result<()> {
    let h = grid.step();
    for tap in system.delay_taps() {
        if !(tap.delay.is_finite() && tap.delay > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("delay must be positive, got {}", tap.delay)));
        }
        if tap.delay < h * (1.0 - 1e-9) {
            return Err(FloquetError::DelayNotResolved { delay: tap.delay, step: h });
        }
        if tap.delay > grid.memory_depth() * (1.0 + 1e-12) + 1e-15 {
            return Err(FloquetError::DelayBeyondMemory { delay: tap.delay, depth: grid.memory_depth() });
        }
    }
    Ok(())
}

/// Right-hand side `F(Y) = M Y + G` at one stage time.
struct Stage {
    m: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl Stage {
    fn eval(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.g.clone();
        out.gemm(1.0, &self.m, y, 1.0);
        out
    }
}

struct BlockIntegrator<'a> {
    system: &'a LinearMemorySystem,
    h: f64,
    nh: i64,
    cols: usize,
    forced: bool,
    /// Full kernel panels and the leftover fraction of a panel, in node units.
    panels: usize,
    remainder: f64,
    weights: Vec<f64>,
    gauss: (Vec<f64>, Vec<f64>),
    nodes: Vec<DMatrix<f64>>,
    /// `half[i]` holds the value at position `i + 1/2` once its stencil is fully known.
    half: Vec<Option<DMatrix<f64>>>,
    next_half: usize,
}

impl<'a> BlockIntegrator<'a> {
    fn new(system: &'a LinearMemorySystem, grid: &PeriodicGrid, history: Vec<DMatrix<f64>>, forced: bool) -> Self {
        let h = grid.step();
        let ratio = if system.kernel().is_some() { grid.memory_depth() / h } else { 0.0 };
        let mut panels = (ratio * (1.0 + 1e-12)).floor() as usize;
        let mut remainder = ratio - panels as f64;
        if remainder < 1e-9 {
            remainder = 0.0;
        }
        if (panels as f64 + remainder - ratio).abs() > 1e-9 {
            panels = ratio.round() as usize;
            remainder = 0.0;
        }
        let cols = history[0].ncols();
        Self {
            system,
            h,
            nh: grid.history_points() as i64,
            cols,
            forced,
            panels,
            remainder,
            weights: quadrature::uniform_weights(panels),
            gauss: quadrature::gauss_legendre(2),
            half: vec![None; history.len()],
            next_half: 0,
            nodes: history,
        }
    }

    fn node(&self, i: i64) -> &DMatrix<f64> {
        &self.nodes[(i + self.nh) as usize]
    }

    /// Lagrange interpolation that never crosses `t = 0`, where the solution joins its history
    /// with a derivative jump.
    fn interpolate(&self, pos: f64, last_known: i64) -> DMatrix<f64> {
        let (lo, hi) = if pos < 0.0 { (-self.nh, 0) } else { (0, last_known) };
        let i = pos.floor() as i64;
        let width = (hi - lo + 1).min(4);
        let start = (i - (width - 1) / 2).clamp(lo, hi - width + 1);
        let mut out = DMatrix::zeros(self.node(start).nrows(), self.cols);
        for k in 0..width {
            let xk = (start + k) as f64;
            let w: f64 = (0..width)
                .filter(|&l| l != k)
                .map(|l| (pos - (start + l) as f64) / (xk - (start + l) as f64))
                .product();
            add_scaled(&mut out, w, self.node(start + k));
        }
        out
    }

    /// State at fractional node position `pos`, using nodes up to `last_known`.
    fn value(&self, pos: f64, last_known: i64) -> Cow<'_, DMatrix<f64>> {
        if let Some(i) = snap(pos) {
            return Cow::Borrowed(self.node(i));
        }
        if let Some(j) = snap(pos + 0.5) {
            if let Some(Some(v)) = self.half.get((j - 1 + self.nh) as usize) {
                return Cow::Borrowed(v);
            }
        }
        Cow::Owned(self.interpolate(pos, last_known))
    }

    /// Caches half-node values whose stencils are complete once node `last_known` exists.
    fn refresh_half(&mut self, last_known: i64) {
        if last_known == 0 {
            for i in -self.nh..0 {
                self.half[(i + self.nh) as usize] = Some(self.interpolate(i as f64 + 0.5, 0));
            }
            return;
        }
        if last_known < 3 {
            return;
        }
        let top = (last_known - 2 + self.nh) as usize;
        if self.half.len() <= top {
            self.half.resize(top + 1, None);
        }
        for idx in self.next_half.max(self.nh as usize)..=top {
            let i = idx as i64 - self.nh;
            self.half[idx] = Some(self.interpolate(i as f64 + 0.5, last_known));
        }
        self.next_half = top + 1;
    }

    /// Stage terms at position `pos` (node units) given nodes up to `last_known`.
    fn stage(&self, pos: f64, last_known: i64) -> Stage {
        let h = self.h;
        let t = pos * h;
        let sys = self.system;
        let mut m = sys.coefficient(t);
        let n = m.nrows();
        let mut g = DMatrix::zeros(n, self.cols);
        for tap in sys.delay_taps() {
            let zd = self.value(pos - tap.delay / h, last_known);
            g.gemm(1.0, &(tap.coefficient)(t), &zd, 1.0);
        }
        if let Some(kernel) = sys.kernel() {
            if self.panels == 0 {
                if self.remainder > 0.0 {
                    // Window shorter than one step: trapezoid between the window start and now.
                    let wr = 0.5 * self.remainder * h;
                    m += kernel(t, t) * wr;
                    let zr = self.value(pos - self.remainder, last_known);
                    g.gemm(wr, &kernel(t, t - self.remainder * h), &zr, 1.0);
                }
            } else {
                m += kernel(t, t) * (self.weights[0] * h);
                for j in 1..=self.panels {
                    let zj = self.value(pos - j as f64, last_known);
                    g.gemm(self.weights[j] * h, &kernel(t, t - j as f64 * h), &zj, 1.0);
                }
                if self.remainder > 0.0 {
                    let b = pos - self.panels as f64;
                    let a = b - self.remainder;
                    let half_len = 0.5 * self.remainder;
                    let mid = 0.5 * (a + b);
                    for (x, w) in self.gauss.0.iter().zip(&self.gauss.1) {
                        let p = mid + half_len * x;
                        let zp = self.value(p, last_known);
                        g.gemm(w * half_len * h, &kernel(t, p * h), &zp, 1.0);
                    }
                }
            }
        }
        if self.forced {
            if let Some(b) = sys.forcing() {
                let bt = b(t);
                for mut col in g.column_iter_mut() {
                    col += &bt;
                }
            }
        }
        Stage { m, g }
    }

    fn run(mut self, steps: usize) -> Vec<DMatrix<f64>> {
        let h = self.h;
        self.nodes.reserve(steps);
        self.refresh_half(0);
        let mut start = self.stage(0.0, 0);
        for k in 0..steps as i64 {
            let kf = k as f64;
            let mid = self.stage(kf + 0.5, k);
            let end = self.stage(kf + 1.0, k);
            let y = self.node(k).clone();
            let k1 = start.eval(&y);
            let k2 = mid.eval(&(&y + &k1 * (0.5 * h)));
            let k3 = mid.eval(&(&y + &k2 * (0.5 * h)));
            let k4 = end.eval(&(&y + &k3 * h));
            let mut next = y;
            add_scaled(&mut next, h / 6.0, &k1);
            add_scaled(&mut next, h / 3.0, &k2);
            add_scaled(&mut next, h / 3.0, &k3);
            add_scaled(&mut next, h / 6.0, &k4);
            self.nodes.push(next);
            self.refresh_half(k + 1);
            start = end;
        }
        self.nodes
    }
}

/// Integrates a block of `c` histories (each node an `n x c` matrix) over `steps` steps.
///
/// Returns all nodes from `-history_points` to `steps`. Columns are split across the
/// rayon pool and reassembled in column order.
pub(crate) fn integrate_block(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    history: Vec<DMatrix<f64>>,
    steps: usize,
    forced: bool,
) -> Result<Vec<DMatrix<f64>>> {
    check_delays(system, grid)?;
    if history.len() != grid.history_points() + 1 {
        return Err(FloquetError::SegmentLength { expected: grid.history_points() + 1, got: history.len() });
    }
    let n = system.dimension();
    if history.iter().any(|b| b.nrows() != n) {
        return Err(FloquetError::InvalidArgument(format!("history dimension does not match system dimension {n}")));
    }
    let cols = history[0].ncols();
    let chunks = rayon::current_num_threads().min(cols).max(1);
    let result = if chunks == 1 || forced {
        BlockIntegrator::new(system, grid, history, forced).run(steps)
    } else {
        let width = cols.div_ceil(chunks);
        let ranges: Vec<(usize, usize)> = (0..cols).step_by(width).map(|c0| (c0, width.min(cols - c0))).collect();
        let parts: Vec<Vec<DMatrix<f64>>> = ranges
            .par_iter()
            .map(|&(c0, w)| {
                let sub = history.iter().map(|b| b.columns(c0, w).into_owned()).collect();
                BlockIntegrator::new(system, grid, sub, false).run(steps)
            })
            .collect();
        (0..parts[0].len())
            .map(|i| {
                let mut block = DMatrix::zeros(n, cols);
                for (&(c0, w), part) in ranges.iter().zip(&parts) {
                    block.columns_mut(c0, w).copy_from(&part[i]);
                }
                block
            })
            .collect()
    };
    let last = result.last().expect("trajectory is never empty");
    if last.iter().any(|v| !v.is_finite()) {
        return Err(FloquetError::InvalidSystem {
            reason: "integration produced non-finite values".into(),
            node: steps as f64 * grid.step(),
        });
    }
    Ok(result)
}

fn segment_block(initial: &StateSegment) -> Vec<DMatrix<f64>> {
    initial.samples().iter().map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect()
}

fn check_segment(system: &LinearMemorySystem, grid: &PeriodicGrid, initial: &StateSegment) -> Result<()> {
    if initial.samples().len() != grid.history_points() + 1 {
        return Err(FloquetError::SegmentLength { expected: grid.history_points() + 1, got: initial.samples().len() });
    }
    if initial.dimension() != system.dimension() {
        return Err(FloquetError::InvalidArgument(format!(
            "segment dimension {} does not match system dimension {}",
            initial.dimension(),
            system.dimension()
        )));
    }
    Ok(())
}

/// All nodes from `-history_points` to `steps`, forcing included if present.
pub(crate) fn integrate_nodes(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    check_segment(system, grid, initial)?;
    let nodes = integrate_block(system, grid, segment_block(initial), steps, true)?;
    Ok(nodes.into_iter().map(|b| b.column(0).into_owned()).collect())
}

fn trajectory(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    span: f64,
) -> Result<Trajectory> {
    let steps = span_steps(span, grid.step())?;
    let nodes = integrate_nodes(system, grid, initial, steps)?;
    let skip = grid.history_points();
    Ok(Trajectory { step: grid.step(), states: nodes.into_iter().skip(skip).collect() })
}

/// Solves the homogeneous system from `initial` on the nodes of `[0, span]`; forcing is ignored.
pub fn step_integrate(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    span: f64,
) -> Result<Trajectory> {
    trajectory(&system.homogeneous(), grid, initial, span)
}

/// Like [`step_integrate`] but keeps the forcing term.
pub(crate) fn integrate_forced(
    system: &LinearMemorySystem,
    grid: &PeriodicGrid,
    initial: &StateSegment,
    span: f64,
) -> Result<Trajectory> {
    trajectory(system, grid, initial, span)
}
