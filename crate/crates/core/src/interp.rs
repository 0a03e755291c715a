//! Piecewise-cubic Lagrange interpolation on uniform nodes.

use nalgebra::{DMatrix, DVector, Scalar};
use num_complex::Complex64;

/// Positions closer than this (in node units) to an integer are treated as exact node hits.
const NODE_SNAP: f64 = 1e-9;

/// Lagrange weights for nodes `0, 1, 2, 3` evaluated at `x`.
pub(crate) fn cubic_weights(x: f64) -> [f64; 4] {
    let (a, b, c, d) = (x, x - 1.0, x - 2.0, x - 3.0);
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

/// Returns `Some(i)` when `pos` is an integer node up to [`NODE_SNAP`].
pub(crate) fn snap(pos: f64) -> Option<i64> {
    let r = pos.round();
    ((pos - r).abs() < NODE_SNAP).then_some(r as i64)
}

/// `out += a * x` for matrices of equal shape.
pub(crate) fn add_scaled(out: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    out.zip_apply(x, |o, v| *o += a * v);
}

/// Blocks (`n x c` matrices) stored at consecutive integer node indices starting at `first`.
pub(crate) struct NodeBlocks<'a> {
    pub blocks: &'a [DMatrix<f64>],
    pub first: i64,
}

impl NodeBlocks<'_> {
    fn block(&self, index: i64) -> &DMatrix<f64> {
        &self.blocks[(index - self.first) as usize]
    }

    /// Value at fractional node position `pos`, using only nodes with index `<= last_known`.
    pub fn at(&self, pos: f64, last_known: i64) -> DMatrix<f64> {
        if let Some(i) = snap(pos) {
            return self.block(i).clone();
        }
        let available = last_known - self.first + 1;
        let i = pos.floor() as i64;
        if available < 4 {
            // Too few nodes for a cubic: fall back to linear interpolation.
            let lo = i.clamp(self.first, (last_known - 1).max(self.first));
            let hi = (lo + 1).min(last_known);
            let t = pos - lo as f64;
            return self.block(lo) * (1.0 - t) + self.block(hi) * t;
        }
        let start = (i - 1).clamp(self.first, last_known - 3);
        let w = cubic_weights(pos - start as f64);
        let mut out = self.block(start) * w[0];
        for (k, wk) in w.iter().enumerate().skip(1) {
            add_scaled(&mut out, *wk, self.block(start + k as i64));
        }
        out
    }
}

/// Periodic cubic interpolation of samples taken at `t_j = j * period / len`.
pub(crate) fn periodic_weights(len: usize, period: f64, t: f64) -> ([usize; 4], [f64; 4]) {
    let h = period / len as f64;
    let pos = (t / h).rem_euclid(len as f64);
    let i = pos.floor() as i64;
    let idx = |k: i64| (k.rem_euclid(len as i64)) as usize;
    if let Some(j) = snap(pos) {
        let j = idx(j);
        return ([j, j, j, j], [1.0, 0.0, 0.0, 0.0]);
    }
    let start = i - 1;
    let w = cubic_weights(pos - start as f64);
    ([idx(start), idx(start + 1), idx(start + 2), idx(start + 3)], w)
}

pub(crate) fn periodic_matrix(samples: &[DMatrix<f64>], period: f64, t: f64) -> DMatrix<f64> {
    let (idx, w) = periodic_weights(samples.len(), period, t);
    let mut out = &samples[idx[0]] * w[0];
    for k in 1..4 {
        if w[k] != 0.0 {
            add_scaled(&mut out, w[k], &samples[idx[k]]);
        }
    }
    out
}

pub(crate) fn periodic_vector<T>(samples: &[DVector<T>], period: f64, t: f64) -> DVector<T>
where
    T: Scalar + Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (idx, w) = periodic_weights(samples.len(), period, t);
    DVector::from_fn(samples[0].len(), |r, _| {
        let mut acc = samples[idx[0]][r] * w[0];
        for k in 1..4 {
            acc = acc + samples[idx[k]][r] * w[k];
        }
        acc
    })
}

pub(crate) fn periodic_complex(samples: &[DVector<Complex64>], period: f64, t: f64) -> DVector<Complex64> {
    periodic_vector(samples, period, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact_for_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
        let blocks: Vec<_> = (0..10).map(|i| DMatrix::from_element(1, 1, f(i as f64))).collect();
        let nb = NodeBlocks { blocks: &blocks, first: 0 };
        for &p in &[0.5, 1.25, 4.7, 8.5, 8.99] {
            let v = nb.at(p, 9)[(0, 0)];
            assert!((v - f(p)).abs() < 1e-10, "p={p}");
        }
        // Extrapolation-free: querying past the last known node shifts the stencil back.
        let v = nb.at(5.5, 6)[(0, 0)];
        assert!((v - f(5.5)).abs() < 1e-10);
    }

    #[test]
    fn node_hits_are_exact() {
        let blocks: Vec<_> = (0..6).map(|i| DMatrix::from_element(2, 1, (i as f64).sin())).collect();
        let nb = NodeBlocks { blocks: &blocks, first: -2 };
        assert_eq!(nb.at(1.0, 3), blocks[3]);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let n = 256;
        let period = 2.0;
        let samples: Vec<_> = (0..n)
            .map(|j| DVector::from_element(1, (std::f64::consts::PI * j as f64 * period / n as f64).cos()))
            .collect();
        for &t in &[-0.3, 0.01, 1.99, 2.5, 7.123] {
            let v = periodic_vector(&samples, period, t)[0];
            assert!((v - (std::f64::consts::PI * t).cos()).abs() < 1e-6, "t={t}");
        }
    }
}
