use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{FloquetError, Result};
use crate::system::VALIDATION_TOL;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarKernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// One-dimensional crystal potential in units where `hbar^2 / 2m = 1`.
///
/// The Hamiltonian is
///
/// ```text
/// H psi = -psi'' + V(x) psi + alpha sum_j delta(x - j a) psi + int W(x, x') psi(x') dx'
/// ```
///
/// with `V(x + a) = V(x)`, `W(x + a, x' + a) = W(x, x')` and `W = 0` for `|x - x'| > range`.
#[derive(Clone)]
pub struct NonlocalPotential1D {
    lattice: f64,
    local: ScalarFn,
    delta_strength: f64,
    kernel: Option<(ScalarKernelFn, f64)>,
}

impl fmt::Debug for NonlocalPotential1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlocalPotential1D")
            .field("lattice", &self.lattice)
            .field("delta_strength", &self.delta_strength)
            .field("kernel_range", &self.kernel_range())
            .finish()
    }
}

impl NonlocalPotential1D {
    pub fn new(lattice: f64, local: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(lattice.is_finite() && lattice > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("lattice constant must be positive, got {lattice}")));
        }
        Ok(Self { lattice, local: Arc::new(local), delta_strength: 0.0, kernel: None })
    }

    pub fn free(lattice: f64) -> Result<Self> {
        Self::new(lattice, |_| 0.0)
    }

    /// Delta comb `(2P/a) sum_j delta(x - j a)`, so that `cos(ka) = cos(qa) + P sin(qa)/(qa)`.
    pub fn kronig_penney(strength: f64, lattice: f64) -> Result<Self> {
        Ok(Self::free(lattice)?.with_delta_comb(2.0 * strength / lattice))
    }

    /// `W(x, x') = gamma w(x) w(x')` for `|x - x'| <= range`, with `w(x) = 1 + m cos(2 pi x / a)`.
    pub fn separable(lattice: f64, gamma: f64, range: f64, modulation: f64) -> Result<Self> {
        let w = move |x: f64| 1.0 + modulation * (2.0 * PI * x / lattice).cos();
        Self::free(lattice)?.with_kernel(range, move |x, y| gamma * w(x) * w(y))
    }

    pub fn with_delta_comb(mut self, alpha: f64) -> Self {
        self.delta_strength = alpha;
        self
    }

    pub fn with_kernel(mut self, range: f64, kernel: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("kernel range must be positive, got {range}")));
        }
        self.kernel = Some((Arc::new(kernel), range));
        Ok(self)
    }

    pub fn lattice(&self) -> f64 {
        self.lattice
    }

    pub fn local(&self, x: f64) -> f64 {
        (self.local)(x)
    }

    pub fn delta_strength(&self) -> f64 {
        self.delta_strength
    }

    /// Kernel value with the range cutoff applied.
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        match &self.kernel {
            Some((w, r)) if (x - y).abs() <= *r * (1.0 + 1e-12) => w(x, y),
            _ => 0.0,
        }
    }

    pub fn kernel_range(&self) -> f64 {
        self.kernel.as_ref().map_or(0.0, |k| k.1)
    }

    pub fn is_local(&self) -> bool {
        self.kernel.is_none()
    }

    /// Periodicity, bi-periodicity and symmetry residuals on `samples` nodes per cell.
    pub fn validate(&self, samples: usize) -> Result<PotentialReport> {
        let a = self.lattice;
        let h = a / samples as f64;
        let mut periodicity: f64 = 0.0;
        for j in 0..samples {
            let x = j as f64 * h;
            let (v0, v1) = (self.local(x), self.local(x + a));
            if !(v0.is_finite() && v1.is_finite()) {
                return Err(FloquetError::InvalidSystem { reason: "non-finite local potential".into(), node: x });
            }
            periodicity = periodicity.max((v1 - v0).abs() / v0.abs().max(1.0));
        }
        let (mut biperiodicity, mut asymmetry): (f64, f64) = (0.0, 0.0);
        if let Some((w, r)) = &self.kernel {
            let reach = (r / h).floor() as i64;
            for j in 0..samples as i64 {
                let x = j as f64 * h;
                for o in -reach..=reach {
                    let y = x + o as f64 * h;
                    let (w0, w1, wt) = (w(x, y), w(x + a, y + a), w(y, x));
                    if !(w0.is_finite() && w1.is_finite() && wt.is_finite()) {
                        return Err(FloquetError::InvalidSystem { reason: "non-finite kernel".into(), node: x });
                    }
                    let scale = w0.abs().max(1.0);
                    biperiodicity = biperiodicity.max((w1 - w0).abs() / scale);
                    asymmetry = asymmetry.max((wt - w0).abs() / scale);
                }
            }
        }
        let passed = periodicity <= VALIDATION_TOL && biperiodicity <= VALIDATION_TOL && asymmetry <= VALIDATION_TOL;
        Ok(PotentialReport { periodicity, biperiodicity, asymmetry, tolerance: VALIDATION_TOL, passed })
    }

    pub(crate) fn check(&self, samples: usize) -> Result<()> {
        let rep = self.validate(samples)?;
        if rep.passed {
            return Ok(());
        }
        Err(FloquetError::InvalidSystem {
            reason: format!(
                "potential fails validation: periodicity {:.2e}, bi-periodicity {:.2e}, asymmetry {:.2e}",
                rep.periodicity, rep.biperiodicity, rep.asymmetry
            ),
            node: 0.0,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub periodicity: f64,
    pub biperiodicity: f64,
    pub asymmetry: f64,
    pub tolerance: f64,
    pub passed: bool,
}
