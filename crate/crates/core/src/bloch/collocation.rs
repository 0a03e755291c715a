//! Whole-cell collocation of the nonlocal Schrödinger equation.
//!
//! With nodes `x_j = j h` on one cell and the Bloch condition `psi_{j+N} = mu psi_j`,
//! row `j` of the discrete equation reads
//!
//! ```text
//! psi_{j+1} - 2 psi_j + psi_{j-1}
//!   - h^2/12 [ g_{j,j+1} psi_{j+1} + 10 g_j psi_j + g_{j,j-1} psi_{j-1} ]
//!   - h^2 sum_s w_{s-j} W(x_j, x_s) psi_s  -  c alpha psi_0 [j = 0]  = 0
//! ```
//!
//! with `g = V - E`, `g_{j,j±1}` the average over the two nodes, Simpson weights `w`
//! over the kernel window and `c = h (1 + g_0 h^2 / 12)` the comb correction. Folding the
//! global index `s` into the cell gives `sum_p mu^p A_p psi = 0`, a polynomial eigenproblem
//! that is linearized and solved by shift-and-invert. The scheme is symmetric, so
//! `A_{-p} = A_p^T` and the multipliers come in exact reciprocal pairs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bloch::potential::NonlocalPotential1D;
use crate::error::{FloquetError, Result};
use crate::grid::MIN_SAMPLES;
use crate::linalg::{self, RealLu};

/// Inverted eigenvalues below this fraction of the largest belong to infinite multipliers.
const INFINITE_FLOOR: f64 = 1e-10;
const SHIFTS: [f64; 3] = [0.618_033_988_749_895, 1.732_050_807_568_877, -0.414_213_562_373_095];

/// Blocks `A_{-P}, ..., A_P` of the folded collocation operator.
pub fn collocation_blocks(pot: &NonlocalPotential1D, energy: f64, samples: usize) -> Result<Vec<DMatrix<f64>>> {
    if samples < MIN_SAMPLES {
        return Err(FloquetError::InvalidGrid(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let n = samples as i64;
    let h = pot.lattice() / samples as f64;
    let range = pot.kernel_range();
    let reach = if pot.is_local() { 0 } else { (range / h * (1.0 + 1e-12)).floor() as i64 };
    let degree = ((reach + n - 1) / n).max(1);
    let mut blocks = vec![DMatrix::zeros(samples, samples); (2 * degree + 1) as usize];
    let mut add = |j: i64, s: i64, v: f64| {
        let p = s.div_euclid(n) + degree;
        blocks[p as usize][(j as usize, s.rem_euclid(n) as usize)] += v;
    };
    let x = |s: i64| s as f64 * h;
    let g = |s: i64| pot.local(x(s)) - energy;
    let c = h * h / 12.0;
    let simpson: Vec<f64> = (0..=2 * reach)
        .map(|l| match l {
            0 => 1.0 / 3.0,
            l if l == 2 * reach => 1.0 / 3.0,
            l if l % 2 == 1 => 4.0 / 3.0,
            _ => 2.0 / 3.0,
        })
        .collect();
    for j in 0..n {
        add(j, j + 1, 1.0 - c * 0.5 * (g(j) + g(j + 1)));
        add(j, j, -2.0 - 10.0 * c * g(j));
        add(j, j - 1, 1.0 - c * 0.5 * (g(j) + g(j - 1)));
        if !pot.is_local() {
            if reach == 0 {
                add(j, j, -h * h * 2.0 * range * pot.kernel(x(j), x(j)));
            } else {
                for (l, w) in simpson.iter().enumerate() {
                    let s = j + l as i64 - reach;
                    add(j, s, -h * h * h * w * pot.kernel(x(j), x(s)));
                }
            }
        }
    }
    add(0, 0, -pot.delta_strength() * h * (1.0 + c * g(0)));
    Ok(blocks)
}

/// All finite nonzero multipliers of the collocation problem.
pub fn collocation_multipliers(pot: &NonlocalPotential1D, energy: f64, samples: usize) -> Result<Vec<Complex64>> {
    let blocks = collocation_blocks(pot, energy, samples)?;
    let n = samples;
    let deg = blocks.len() - 1;
    let size = deg * n;
    // Companion pencil A v = mu B v with v = (psi, mu psi, ..., mu^{deg-1} psi).
    let mut a = DMatrix::zeros(size, size);
    let mut b = DMatrix::identity(size, size);
    for i in 0..deg - 1 {
        a.view_mut((i * n, (i + 1) * n), (n, n)).fill_with_identity();
    }
    for (q, block) in blocks.iter().take(deg).enumerate() {
        a.view_mut(((deg - 1) * n, q * n), (n, n)).copy_from(&(-block));
    }
    b.view_mut(((deg - 1) * n, (deg - 1) * n), (n, n)).copy_from(&blocks[deg]);

    let mut last_err = None;
    for s in SHIFTS {
        let lu = match RealLu::new(&(&a - &b * s)) {
            Ok(lu) => lu,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let thetas = linalg::eigenvalues(&lu.solve_matrix(&b))?;
        let top = thetas.iter().map(|t| t.norm()).fold(0.0, f64::max);
        let mut mus: Vec<Complex64> = thetas
            .iter()
            .filter(|t| t.norm() > INFINITE_FLOOR * top)
            .map(|t| Complex64::new(s, 0.0) + t.inv())
            .collect();
        // The pencil is palindromic up to transposition, so every infinite multiplier has a
        // zero partner; drop as many of the smallest ones.
        let infinite = thetas.len() - mus.len();
        mus.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        return Ok(mus.split_off(infinite.min(mus.len())));
    }
    Err(last_err.unwrap_or_else(|| FloquetError::Singular("collocation pencil".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::schrodinger::local_transfer;

    fn nearest(set: &[Complex64], z: Complex64) -> f64 {
        set.iter().map(|m| (m - z).norm()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn blocks_are_transposes() {
        let pot = NonlocalPotential1D::separable(1.0, 4.0, 1.0, 0.3).unwrap();
        let b = collocation_blocks(&pot, 7.8, 32).unwrap();
        assert_eq!(b.len(), 3);
        assert!((&b[0] - b[2].transpose()).amax() < 1e-12);
        assert!((&b[1] - b[1].transpose()).amax() < 1e-12);
    }

    #[test]
    fn local_comb_matches_transfer_matrix() {
        let pot = NonlocalPotential1D::kronig_penney(3.0, 1.0).unwrap();
        for e in [2.0, 6.0, 12.0] {
            let mus = collocation_multipliers(&pot, e, 128).unwrap();
            let t = local_transfer(&pot, e, 256).unwrap();
            for mu in linalg::eigenvalues(&t).unwrap() {
                assert!(nearest(&mus, mu) < 1e-4 * mu.norm().max(1.0), "E = {e}, mu = {mu}, got {mus:?}");
            }
        }
    }

    #[test]
    fn multipliers_pair_reciprocally() {
        let pot = NonlocalPotential1D::separable(1.0, 4.0, 1.0, 0.3).unwrap();
        let mus = collocation_multipliers(&pot, 7.8, 32).unwrap();
        for mu in &mus {
            let r = mu.inv().conj();
            assert!(nearest(&mus, r) < 1e-6 * r.norm(), "{mu}");
        }
    }
}
