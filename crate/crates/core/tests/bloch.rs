mod common;

use std::f64::consts::PI;

use gfloquet::bloch::{
    band_edges, band_scan, detect_interior_extrema, fixed_point_monodromy, kronig_penney_reference,
    propagating_multipliers, NonlocalPotential1D, DEFAULT_UNIT_TOL,
};
use gfloquet::PeriodicGrid;
use proptest::prelude::*;

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(1.0, n, 0.0).unwrap()
}

fn energies(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Smallest energy above `lo` where `|D(E)| = 1`, by bisection on the analytic discriminant.
fn kp_edge(p: f64, lo: f64, hi: f64) -> f64 {
    let f = |e: f64| kronig_penney_reference(p, 1.0, e).unwrap().discriminant.abs() - 1.0;
    let (mut a, mut b) = (lo, hi);
    assert!(f(a).signum() != f(b).signum());
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if f(m).signum() == f(a).signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn kronig_penney_scan_matches_reference() {
    let pot = NonlocalPotential1D::kronig_penney(3.0, 1.0).unwrap();
    let es = energies(0.05, 40.0, 200);
    let d = band_scan(&pot, &es, &grid(256), DEFAULT_UNIT_TOL).unwrap();
    let mut disagreements = 0;
    for rec in &d.records {
        assert!(rec.p == 0 || rec.p == 2, "p = {} at {}", rec.p, rec.energy);
        let oracle = kronig_penney_reference(3.0, 1.0, rec.energy).unwrap();
        if oracle.allowed != (rec.p == 2) {
            disagreements += 1;
        }
        if let (true, Some(k)) = (rec.p == 2, oracle.k) {
            assert!((rec.k_values[1] - k).abs() < 1e-4 * (1.0 + k), "{} vs {k} at {}", rec.k_values[1], rec.energy);
        }
    }
    assert!(disagreements <= 2, "{disagreements}");
    assert!(detect_interior_extrema(&d).extrema.is_empty());
}

#[test]
fn kronig_penney_band_edges() {
    let pot = NonlocalPotential1D::kronig_penney(3.0, 1.0).unwrap();
    let d = band_scan(&pot, &energies(0.5, 12.0, 47), &grid(256), DEFAULT_UNIT_TOL).unwrap();
    let edges = band_edges(&pot, &d, &grid(256), 1e-7).unwrap();
    let first = kp_edge(3.0, 0.5, 6.0);
    let second = kp_edge(3.0, first + 0.5, 9.9);
    assert!((edges[0] - first).abs() < 1e-4, "{} vs {first}", edges[0]);
    assert!((edges[1] - second).abs() < 1e-4, "{} vs {second}", edges[1]);
}

#[test]
fn free_particle_dispersion() {
    let pot = NonlocalPotential1D::free(1.0).unwrap();
    let es = energies(0.1, 9.0, 60);
    let d = band_scan(&pot, &es, &grid(256), DEFAULT_UNIT_TOL).unwrap();
    for rec in &d.records {
        let k = rec.k_values[1];
        assert!((k - rec.energy.sqrt()).abs() <= 1e-6 * rec.energy.sqrt(), "{k} at {}", rec.energy);
    }
    assert!(detect_interior_extrema(&d).extrema.is_empty());
}

#[test]
fn separable_kernel_against_plane_waves() {
    let pot = NonlocalPotential1D::separable(1.0, 4.0, 1.0, 0.3).unwrap();
    let es = energies(7.0, 11.0, 81);
    let d = band_scan(&pot, &es, &grid(128), DEFAULT_UNIT_TOL).unwrap();
    let mut saw_four = false;
    for rec in &d.records {
        assert!(rec.error.is_none());
        assert_eq!(rec.p % 2, 0);
        assert!(rec.pairing_residual < 1e-6, "{}", rec.pairing_residual);
        saw_four |= rec.p == 4;
        for k in &rec.k_values {
            let bands = common::separable_plane_wave_bands(1.0, 4.0, 1.0, 0.3, *k, 24);
            let gap = bands.iter().map(|e| (e - rec.energy).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap < 2e-3, "E = {}, k = {k}: nearest plane-wave band {gap}", rec.energy);
        }
    }
    assert!(saw_four);
    let rep = detect_interior_extrema(&d);
    eprintln!("{rep:?}");
    assert!(!rep.extrema.is_empty());
    assert!(rep.ambiguous);
}

#[test]
fn fixed_point_agrees_with_collocation() {
    let pot = NonlocalPotential1D::separable(1.0, 0.5, 0.5, 0.3).unwrap();
    let e = 3.0;
    let set = propagating_multipliers(&pot, e, &grid(128), DEFAULT_UNIT_TOL).unwrap();
    assert_eq!(set.p, 2);
    let on = fixed_point_monodromy(&pot, e, set.propagating[1], &grid(64)).unwrap();
    let off = fixed_point_monodromy(
        &pot,
        e,
        set.propagating[1] * gfloquet::floquet::exponent(num_complex::Complex64::new(0.0, 0.4).exp(), 1.0).exp(),
        &grid(64),
    )
    .unwrap();
    eprintln!("fixed point on {on:?} off {off:?}");
    assert!(on.residual < 1e-4);
    assert!(off.residual > 1e-2);
}

#[test]
fn strong_kernel_contraction_is_reported() {
    let pot = NonlocalPotential1D::separable(1.0, 4.0, 1.0, 0.3).unwrap();
    let r = fixed_point_monodromy(&pot, 7.8, num_complex::Complex64::from_polar(1.0, 1.0), &grid(32));
    eprintln!("strong kernel: {r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn spectra_are_even_and_paired(e in 0.2f64..30.0, gamma in -3.0f64..3.0, m in 0.0f64..0.5) {
        let pot = NonlocalPotential1D::separable(1.0, gamma, 0.6, m).unwrap().with_delta_comb(1.0);
        let set = propagating_multipliers(&pot, e, &grid(48), DEFAULT_UNIT_TOL).unwrap();
        prop_assert_eq!(set.p % 2, 0);
        prop_assert!(set.pairing_residual < 1e-6);
        for k in &set.k_values {
            let folded = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
            let best = set.k_values.iter().map(|q| folded(q + k).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6);
        }
    }

    #[test]
    fn local_potentials_have_at_most_one_pair(e in 0.1f64..50.0, p in -2.0f64..6.0) {
        let pot = NonlocalPotential1D::kronig_penney(p, 1.0).unwrap();
        let set = propagating_multipliers(&pot, e, &grid(64), DEFAULT_UNIT_TOL).unwrap();
        prop_assert!(set.p == 0 || set.p == 2);
    }
}
