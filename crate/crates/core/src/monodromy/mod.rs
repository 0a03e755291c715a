//! Period-shift operators of memory systems and their spectra.

pub mod integrate;
pub mod operator;
pub mod spectrum;
pub mod truncate;
pub mod verify;

pub use integrate::{step_integrate, Trajectory};
pub use operator::{build_monodromy, MonodromyOperator};
pub use spectrum::{extract_mode, floquet_spectrum, floquet_spectrum_with, operator_spectrum, SpectrumOptions};
pub use truncate::{truncate_infinite_kernel, Truncation};
pub use verify::{verify_floquet_form, VerificationReport};
