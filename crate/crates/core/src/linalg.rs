//! Dense eigenvalue and LU routines backed by faer.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FloquetError, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_faer_complex(m: &DMatrix<Complex64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(FloquetError::Eigensolver("matrix is not square".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FloquetError::Eigensolver("matrix has non-finite entries".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let vals = to_faer(m).eigenvalues().map_err(|e| FloquetError::Eigensolver(format!("{e:?}")))?;
    if vals.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(FloquetError::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(vals)
}

/// LU factorization of a complex square matrix.
pub struct ComplexLu {
    lu: faer::linalg::solvers::PartialPivLu<c64>,
    n: usize,
}

impl ComplexLu {
    /// Factorizes `m`, failing if a pivot is negligible relative to the largest entry.
    pub fn new(m: &DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        let fm = to_faer_complex(m);
        let lu = fm.partial_piv_lu();
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let u = lu.U();
        let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-14 * scale) {
            return Err(FloquetError::Singular(format!("pivot {min_pivot:.3e} relative to scale {scale:.3e}")));
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        DVector::from_fn(self.n, |i, _| x[(i, 0)])
    }
}

/// LU factorization of a real square matrix.
pub struct RealLu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl RealLu {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let lu = to_faer(m).partial_piv_lu();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let u = lu.U();
        let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-14 * scale) {
            return Err(FloquetError::Singular(format!("pivot {min_pivot:.3e} relative to scale {scale:.3e}")));
        }
        Ok(Self { lu, n })
    }

    /// Solves `A X = B` for a block of right-hand sides.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = to_faer(b);
        let x = self.lu.solve(&rhs);
        DMatrix::from_fn(self.n, b.ncols(), |i, j| x[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_has_unit_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut vals = eigenvalues(&m).unwrap();
        vals.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((vals[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((vals[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn complex_solve_roundtrip() {
        let m = DMatrix::from_fn(3, 3, |i, j| {
            Complex64::new((i + 2 * j) as f64 + if i == j { 5.0 } else { 0.0 }, i as f64 - j as f64)
        });
        let x = DVector::from_fn(3, |i, _| Complex64::new(i as f64, 1.0));
        let b = &m * &x;
        let got = ComplexLu::new(&m).unwrap().solve(&b);
        assert!((got - x).norm() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(RealLu::new(&m).is_err());
    }
}
