use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error)]
pub enum FloquetError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid system: {reason} (at sigma = {node})")]
    InvalidSystem { reason: String, node: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state segment has {got} samples, grid expects {expected}")]
    SegmentLength { expected: usize, got: usize },

    #[error("span {span} is not a positive multiple of the step {step}")]
    SpanNotMultiple { span: f64, step: f64 },

    #[error("delay {delay} is shorter than the grid step {step}; refine the grid")]
    DelayNotResolved { delay: f64, step: f64 },

    #[error("delay {delay} exceeds the memory depth {depth}")]
    DelayBeyondMemory { delay: f64, depth: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("no converged multipliers among {candidates} candidates; try a finer grid (N = {samples})")]
    NoConvergedMultipliers { candidates: usize, samples: usize },

    #[error("{mu} is not an eigenvalue of the monodromy operator (nearest at relative distance {distance:.3e})")]
    NotAnEigenvalue { mu: num_complex::Complex64, distance: f64 },

    #[error("kernel tail does not decay: tail integral still {tail:.3e} at r = {depth:.3e}")]
    NonTruncatable { tail: f64, depth: f64 },

    #[error("retained spectrum is empty")]
    EmptySpectrum,

    #[error("limit cycle wrap residual {residual:.3e} exceeds {tolerance:.1e}")]
    CycleNotClosed { residual: f64, tolerance: f64 },

    #[error(
        "fixed-point iteration did not converge after {iterations} iterations (contraction estimate {contraction:.3})"
    )]
    NonConvergent { iterations: usize, contraction: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, FloquetError>;
