//! Limit-cycle stability of nonlinear memory systems and forced responses.

pub mod forced;
pub mod nonlinear;
pub mod stability;

pub use forced::{forced_response, forced_response_checked, variation_of_constants};
pub use nonlinear::{jacobian, linearize, CycleSource, LimitCycle, NonlinearMemorySystem};
pub use stability::{phase_mode_alignment, stability_verdict, ExponentClass, StabilityReport, Verdict};
