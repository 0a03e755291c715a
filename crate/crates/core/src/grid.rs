//! Uniform sampling of one period plus the memory window that precedes it.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{FloquetError, Result};

/// Smallest number of samples per period accepted by [`PeriodicGrid::new`].
pub const MIN_SAMPLES: usize = 8;

/// Uniform grid with step `h = period / samples` covering `[-memory_depth, period]`.
///
/// The history window is discretized with `history_points + 1` nodes
/// `-history_points * h, ..., -h, 0`, so it always covers the full memory depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicGrid {
    period: f64,
    samples: usize,
    memory_depth: f64,
    history_points: usize,
}

impl PeriodicGrid {
    pub fn new(period: f64, samples: usize, memory_depth: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(FloquetError::InvalidGrid(format!("period must be positive, got {period}")));
        }
        if samples < MIN_SAMPLES {
            return Err(FloquetError::InvalidGrid(format!(
                "need at least {MIN_SAMPLES} samples per period, got {samples}"
            )));
        }
        if !(memory_depth.is_finite() && memory_depth >= 0.0) {
            return Err(FloquetError::InvalidGrid(format!(
                "memory depth must be finite and non-negative, got {memory_depth}"
            )));
        }
        let h = period / samples as f64;
        // Snap ratios that are integers up to roundoff so that r = k*h gives exactly k points.
        let ratio = memory_depth / h;
        let history_points = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(Self { period, samples, memory_depth, history_points })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn memory_depth(&self) -> f64 {
        self.memory_depth
    }

    pub fn history_points(&self) -> usize {
        self.history_points
    }

    pub fn step(&self) -> f64 {
        self.period / self.samples as f64
    }

    /// Dimension of the discretized history space for an `n`-dimensional state.
    pub fn segment_dimension(&self, n: usize) -> usize {
        n * (self.history_points + 1)
    }

    /// Time of history node `i` (`0 ..= history_points`).
    pub fn history_time(&self, i: usize) -> f64 {
        (i as f64 - self.history_points as f64) * self.step()
    }

    /// Times of the `samples + 1` nodes of `[0, period]`.
    pub fn period_nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.samples).map(|k| k as f64 * h).collect()
    }

    /// Same period and memory, `factor` times as many samples.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.period, self.samples * factor.max(1), self.memory_depth)
    }

    pub fn with_samples(&self, samples: usize) -> Result<Self> {
        Self::new(self.period, samples, self.memory_depth)
    }
}

/// Samples of an `n`-dimensional state on the history nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSegment {
    samples: Vec<DVector<f64>>,
}

impl StateSegment {
    pub fn new(grid: &PeriodicGrid, samples: Vec<DVector<f64>>) -> Result<Self> {
        let expected = grid.history_points() + 1;
        if samples.len() != expected {
            return Err(FloquetError::SegmentLength { expected, got: samples.len() });
        }
        let n = samples[0].len();
        for (i, s) in samples.iter().enumerate() {
            if s.len() != n {
                return Err(FloquetError::InvalidArgument(format!(
                    "segment sample {i} has dimension {}, expected {n}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(FloquetError::InvalidArgument(format!("segment sample {i} is not finite")));
            }
        }
        Ok(Self { samples })
    }

    /// Constant history equal to `value` on every node.
    pub fn constant(grid: &PeriodicGrid, value: DVector<f64>) -> Result<Self> {
        Self::new(grid, vec![value; grid.history_points() + 1])
    }

    /// History sampled from a function of time.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let samples = (0..=grid.history_points()).map(|i| f(grid.history_time(i))).collect();
        Self::new(grid, samples)
    }

    /// Unpacks a node-major stacked vector of length `n * (history_points + 1)`.
    pub fn from_stacked(grid: &PeriodicGrid, n: usize, stacked: &[f64]) -> Result<Self> {
        let nodes = grid.history_points() + 1;
        if stacked.len() != n * nodes {
            return Err(FloquetError::SegmentLength { expected: n * nodes, got: stacked.len() / n.max(1) });
        }
        let samples = stacked.chunks(n).map(DVector::from_column_slice).collect();
        Self::new(grid, samples)
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn dimension(&self) -> usize {
        self.samples[0].len()
    }

    /// Value at the last node (time 0).
    pub fn current(&self) -> &DVector<f64> {
        self.samples.last().expect("segment is never empty")
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.samples.iter().flat_map(|s| s.iter().copied()).collect()
    }
}
