//! Floquet analysis of linear periodic systems with memory.
//!
//! The crate discretizes the history of a delay or integro-differential system on a
//! uniform grid, builds the matrix of the period-shift map, and extracts multipliers,
//! exponents and periodic modes from it. On top of that it offers limit-cycle stability
//! for nonlinear memory systems and Bloch bands of 1D crystals with nonlocal potentials.

pub mod bloch;
pub mod error;
pub mod floquet;
pub mod grid;
mod interp;
pub mod linalg;
pub mod monodromy;
pub mod perturbation;
pub mod quadrature;
pub mod system;

pub use error::{FloquetError, Result};
pub use floquet::{FloquetDecomposition, Multiplier, PeriodicMode};
pub use grid::{PeriodicGrid, StateSegment};
pub use system::{sampled_table, shift_commutation_residual, validate_system, LinearMemorySystem, ValidationReport};
