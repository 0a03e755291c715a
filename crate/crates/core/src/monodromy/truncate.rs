use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FloquetError, Result};
use crate::quadrature;
use crate::system::inf_norm;

const MAX_CHUNKS: usize = 60;
const MAX_DOUBLINGS: usize = 60;
const SIGMA_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Truncation {
    pub depth: f64,
    /// Tail integral beyond `depth`.
    pub tail: f64,
    /// Grid steps in `depth`.
    pub steps: usize,
}

struct Tail<'a> {
    kernel: &'a dyn Fn(f64, f64) -> DMatrix<f64>,
    bound: &'a dyn Fn(f64) -> f64,
    period: f64,
    sigmas: Vec<f64>,
    rule: (Vec<f64>, Vec<f64>),
    tolerance: f64,
}

impl Tail<'_> {
    fn integrand(&self, s: f64, u: f64) -> f64 {
        inf_norm(&(self.kernel)(s, s - u)) * (self.bound)(s - u).abs()
    }

    /// `int_depth^inf ||K(s, s - u)|| bound(s - u) du`, or infinity if the chunks fail to decay.
    fn at_sigma(&self, s: f64, depth: f64) -> f64 {
        let mut total = 0.0;
        let mut start = depth;
        for i in 0..MAX_CHUNKS {
            let len = self.period * 2f64.powi(i as i32);
            let pieces = 4;
            let piece = len / pieces as f64;
            let chunk: f64 = (0..pieces)
                .map(|p| {
                    let a = start + p as f64 * piece;
                    quadrature::gauss_panel(|u| self.integrand(s, u), a, a + piece, &self.rule)
                })
                .sum();
            if !chunk.is_finite() {
                return f64::INFINITY;
            }
            total += chunk;
            start += len;
            if chunk <= 1e-12 * total || chunk <= 1e-6 * self.tolerance {
                return total;
            }
        }
        f64::INFINITY
    }

    fn sup(&self, depth: f64) -> f64 {
        self.sigmas.iter().map(|&s| self.at_sigma(s, depth)).fold(0.0, f64::max)
    }
}

/// Smallest grid-aligned memory depth whose neglected kernel tail is below `epsilon`.
///
/// The tail is `sup_s int_{-inf}^{s-r} ||K(s, t)|| |bound(t)| dt`, with the supremum taken over
/// samples of one period. Depths are multiples of `period / samples`.
pub fn truncate_infinite_kernel(
    kernel: &dyn Fn(f64, f64) -> DMatrix<f64>,
    bound: &dyn Fn(f64) -> f64,
    period: f64,
    samples: usize,
    epsilon: f64,
) -> Result<Truncation> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(FloquetError::InvalidArgument(format!("tolerance must be positive, got {epsilon}")));
    }
    if !(period > 0.0 && period.is_finite()) || samples == 0 {
        return Err(FloquetError::InvalidGrid(format!("period {period} with {samples} samples")));
    }
    let count = samples.min(SIGMA_SAMPLES);
    let tail = Tail {
        kernel,
        bound,
        period,
        sigmas: (0..count).map(|i| i as f64 * period / count as f64).collect(),
        rule: quadrature::gauss_legendre(16),
        tolerance: epsilon,
    };
    let h = period / samples as f64;
    let t0 = tail.sup(0.0);
    if !t0.is_finite() {
        return Err(FloquetError::NonTruncatable { tail: t0, depth: 0.0 });
    }
    if t0 < epsilon {
        return Ok(Truncation { depth: 0.0, tail: t0, steps: 0 });
    }
    let mut hi: usize = 1;
    let mut t_hi = tail.sup(h);
    let mut doublings = 0;
    while t_hi >= epsilon {
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !t_hi.is_finite() {
            return Err(FloquetError::NonTruncatable { tail: t_hi, depth: hi as f64 * h });
        }
        hi *= 2;
        t_hi = tail.sup(hi as f64 * h);
    }
    // Invariant: tail(lo) >= epsilon > tail(hi).
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let t = tail.sup(mid as f64 * h);
        if t < epsilon {
            hi = mid;
            t_hi = t;
        } else {
            lo = mid;
        }
    }
    Ok(Truncation { depth: hi as f64 * h, tail: t_hi, steps: hi })
}
