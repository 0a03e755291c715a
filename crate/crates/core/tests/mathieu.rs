mod common;

use std::f64::consts::PI;

use gfloquet::monodromy::{build_monodromy, operator_spectrum};
use gfloquet::{LinearMemorySystem, PeriodicGrid};
use nalgebra::{DMatrix, DVector};

const EPS: f64 = 0.2;

fn mathieu(delta: f64) -> LinearMemorySystem {
    LinearMemorySystem::new(2, move |s| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(delta + EPS * s.cos()), 0.0]))
}

fn largest_multiplier(delta: f64) -> f64 {
    let grid = PeriodicGrid::new(2.0 * PI, 256, 0.0).unwrap();
    let u = build_monodromy(&mathieu(delta), &grid).unwrap();
    operator_spectrum(&u).unwrap().iter().map(|m| m.norm()).fold(0.0, f64::max)
}

/// Growth over many periods from two independent initial states, by plain RK4.
fn grows(delta: f64) -> bool {
    let f = move |t: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -(delta + EPS * t.cos()) * y[0]]);
    let periods = 400.0;
    [DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])]
        .into_iter()
        .any(|y0| common::rk4(f, y0, 0.0, periods * 2.0 * PI, 400 * 200).norm() > 1e4)
}

fn bisect(mut lo: f64, mut hi: f64, unstable: impl Fn(f64) -> bool) -> f64 {
    assert!(!unstable(lo) && unstable(hi));
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if unstable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn first_tongue_boundary_matches_long_integration() {
    let library = bisect(0.1, 0.2, |d| largest_multiplier(d) > 1.0 + 1e-6);
    let oracle = bisect(0.1, 0.2, grows);
    eprintln!("library {library}, long integration {oracle}");
    assert!((library - oracle).abs() < 2e-3);
}
