use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::grid::{PeriodicGrid, StateSegment};
use crate::monodromy::integrate::integrate_block;
use crate::system::LinearMemorySystem;

/// Discretized period-shift map on the history space.
///
/// Entry `(i, j)` maps history coordinate `j` to coordinate `i`, where coordinates are
/// stored node-major: index `node * n + component`, node 0 being the oldest.
#[derive(Debug, Clone)]
pub struct MonodromyOperator {
    matrix: DMatrix<f64>,
    grid: PeriodicGrid,
    dimension: usize,
    fingerprint: String,
}

impl MonodromyOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// State dimension `n` of the underlying system.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Applies the operator to a history segment.
    pub fn apply(&self, segment: &StateSegment) -> Result<StateSegment> {
        let x = DVector::from_vec(segment.stacked());
        let y = &self.matrix * x;
        StateSegment::from_stacked(&self.grid, self.dimension, y.as_slice())
    }
}

/// History block whose column `j` is the `j`-th canonical unit history.
pub(crate) fn identity_history(n: usize, nodes: usize) -> Vec<DMatrix<f64>> {
    let m = n * nodes;
    (0..nodes)
        .map(|i| {
            let mut b = DMatrix::zeros(n, m);
            for c in 0..n {
                b[(c, i * n + c)] = 1.0;
            }
            b
        })
        .collect()
}

/// Stacks the `n x c` node blocks of a window into an `(nodes * n) x c` matrix.
pub(crate) fn stack_window(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let c = blocks[0].ncols();
    let mut out = DMatrix::zeros(n * blocks.len(), c);
    for (i, b) in blocks.iter().enumerate() {
        out.rows_mut(i * n, n).copy_from(b);
    }
    out
}

/// Builds the monodromy operator by integrating every unit history over one period.
///
/// Forcing is ignored.
pub fn build_monodromy(system: &LinearMemorySystem, grid: &PeriodicGrid) -> Result<MonodromyOperator> {
    let n = system.dimension();
    let nodes = grid.history_points() + 1;
    let homogeneous = system.homogeneous();
    let traj = integrate_block(&homogeneous, grid, identity_history(n, nodes), grid.samples(), false)?;
    let matrix = stack_window(&traj[traj.len() - nodes..]);
    Ok(MonodromyOperator { matrix, grid: *grid, dimension: n, fingerprint: system.fingerprint(grid) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monodromy::integrate::step_integrate;
    use std::f64::consts::PI;

    #[test]
    fn scalar_cosine_entry_is_exact_exponential() {
        let sys = LinearMemorySystem::new(1, |s| DMatrix::from_element(1, 1, 0.3 + (2.0 * PI * s).cos()));
        let grid = PeriodicGrid::new(1.0, 256, 0.0).unwrap();
        let u = build_monodromy(&sys, &grid).unwrap();
        assert_eq!(u.size(), 1);
        assert!((u.matrix()[(0, 0)] - 0.3f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_system_freezes_current_value() {
        let sys = LinearMemorySystem::zero(2);
        let grid = PeriodicGrid::new(1.0, 8, 0.5).unwrap();
        let u = build_monodromy(&sys, &grid).unwrap();
        let m = u.size();
        assert_eq!(m, 2 * 5);
        for j in 0..m {
            let node = j / 2;
            let comp = j % 2;
            for i in 0..m {
                let expected = if node == 4 && i % 2 == comp { 1.0 } else { 0.0 };
                assert_eq!(u.matrix()[(i, j)], expected, "({i}, {j})");
            }
        }
    }

    #[test]
    fn operator_matches_direct_integration() {
        let sys = LinearMemorySystem::new(1, |s| DMatrix::from_element(1, 1, -0.5 + (2.0 * PI * s).sin()))
            .with_delay_tap(0.5, |s| DMatrix::from_element(1, 1, 0.8 * (2.0 * PI * s).cos()))
            .with_kernel(|s, t| DMatrix::from_element(1, 1, 0.3 * (-(s - t)).exp()));
        let grid = PeriodicGrid::new(1.0, 32, 0.75).unwrap();
        let u = build_monodromy(&sys, &grid).unwrap();
        let init = StateSegment::from_fn(&grid, |t| DVector::from_element(1, (3.0 * t).cos() + t)).unwrap();
        let direct = step_integrate(&sys, &grid, &init, 1.0).unwrap();
        let via_u = u.apply(&init).unwrap();
        assert!((via_u.current() - direct.last()).norm() < 1e-12);
    }
}
