//! Bloch bands of one-dimensional crystals with nonlocal potentials.
//!
//! The stationary Schrödinger equation is treated as a periodic system in the spatial
//! variable: the Floquet multipliers of one lattice cell are the Bloch factors `e^{ika}`.
//! Propagating states have multipliers on the unit circle and real wavevectors `k`.

pub mod bands;
pub mod collocation;
pub mod kronig_penney;
pub mod potential;
pub mod schrodinger;

pub use bands::{
    band_edges, band_scan, detect_interior_extrema, propagating_multipliers, transfer_matrix, BandDiagram, BandRecord,
    ExtremaReport, Extremum, PropagatingSet, DEFAULT_UNIT_TOL, RETAIN_RATIO,
};
pub use collocation::{collocation_blocks, collocation_multipliers};
pub use kronig_penney::{kronig_penney_reference, KronigPenneyPoint};
pub use potential::{NonlocalPotential1D, PotentialReport};
pub use schrodinger::{comb_jump, fixed_point_monodromy, local_transfer, schrodinger_system, FixedPointMonodromy};
