use serde::Serialize;

use crate::error::{FloquetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KronigPenneyPoint {
    pub discriminant: f64,
    pub allowed: bool,
    /// Wavevector in `[0, pi/a]` when the energy is allowed.
    pub k: Option<f64>,
}

/// Analytic band condition of the delta comb of strength `P`:
/// `D(E) = cos(qa) + P sin(qa)/(qa)`, `q = sqrt(E)`, allowed iff `|D| <= 1`.
pub fn kronig_penney_reference(strength: f64, lattice: f64, energy: f64) -> Result<KronigPenneyPoint> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(FloquetError::InvalidArgument(format!("energy must be positive, got {energy}")));
    }
    if !(lattice > 0.0 && lattice.is_finite()) {
        return Err(FloquetError::InvalidArgument(format!("lattice constant must be positive, got {lattice}")));
    }
    let qa = energy.sqrt() * lattice;
    let d = qa.cos() + strength * qa.sin() / qa;
    let allowed = d.abs() <= 1.0;
    Ok(KronigPenneyPoint { discriminant: d, allowed, k: allowed.then(|| d.acos() / lattice) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_limit_folds_sqrt_energy() {
        for e in [0.5, 4.0, 12.0, 30.0] {
            let r = kronig_penney_reference(0.0, 1.0, e).unwrap();
            assert!(r.allowed);
            let q = f64::sqrt(e);
            let folded = (q + PI).rem_euclid(2.0 * PI) - PI;
            assert!((r.k.unwrap() - folded.abs()).abs() < 1e-7, "{e}");
        }
    }

    #[test]
    fn low_energy_is_forbidden_for_repulsive_comb() {
        let r = kronig_penney_reference(3.0, 1.0, 1e-8).unwrap();
        assert!(!r.allowed);
        assert!((r.discriminant - 4.0).abs() < 1e-6);
    }

    #[test]
    fn nonpositive_energy_is_rejected() {
        assert!(kronig_penney_reference(3.0, 1.0, 0.0).is_err());
    }
}
