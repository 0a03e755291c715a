//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Classical RK4 for `y' = f(t, y)` with `steps` equal steps over `[t0, t1]`.
pub fn rk4(
    f: impl Fn(f64, &DVector<f64>) -> DVector<f64>,
    y0: DVector<f64>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> DVector<f64> {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &(&y + &k1 * (h / 2.0)));
        let k3 = f(t + h / 2.0, &(&y + &k2 * (h / 2.0)));
        let k4 = f(t + h, &(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// Fundamental matrix of `y' = A(t) y` over `[0, period]`.
pub fn fundamental(a: impl Fn(f64) -> DMatrix<f64>, n: usize, period: f64, steps: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            rk4(|t, y| a(t) * y, e, 0.0, period, steps)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Eigenvalues of a real 2x2 matrix.
pub fn eig2(m: &DMatrix<f64>) -> [Complex64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    [Complex64::new(tr / 2.0, 0.0) + disc, Complex64::new(tr / 2.0, 0.0) - disc]
}

/// Deterministic pseudo-random matrix with entries in `[-1, 1]`.
pub fn seeded_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Band energies at wavevector `k` of `-psi'' + int W psi` for the separable kernel
/// `W = gamma w(x) w(x') [|x - x'| <= r]`, `w = 1 + m cos(2 pi x / a)`, in a plane-wave basis.
pub fn separable_plane_wave_bands(a: f64, gamma: f64, r: f64, m: f64, k: f64, cutoff: i64) -> Vec<f64> {
    let b = 2.0 * std::f64::consts::PI / a;
    let size = (2 * cutoff + 1) as usize;
    let coef = |n: i64| match n {
        0 => 1.0,
        1 | -1 => m / 2.0,
        _ => 0.0,
    };
    let window = |q: f64| if q.abs() < 1e-12 { 2.0 * r } else { 2.0 * (q * r).sin() / q };
    let mut h = DMatrix::zeros(size, size);
    for (i, g) in (-cutoff..=cutoff).enumerate() {
        for (j, gp) in (-cutoff..=cutoff).enumerate() {
            let mut v = 0.0;
            for n in -1..=1 {
                let np = g - gp - n;
                v += gamma * coef(n) * coef(np) * window(k + gp as f64 * b + n as f64 * b);
            }
            if i == j {
                v += (k + g as f64 * b).powi(2);
            }
            h[(i, j)] = v;
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    assert!((&h - &sym).amax() < 1e-9, "plane-wave Hamiltonian is not symmetric");
    let mut e: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Van der Pol limit cycle `y1' = y2, y2' = m (1 - y1^2) y2 - y1` by long RK4 integration.
///
/// Returns the period and `intervals + 1` samples starting on the section `y2 = 0, y1 > 0`.
pub fn van_der_pol_cycle(m: f64, intervals: usize) -> (f64, Vec<DVector<f64>>) {
    let f = move |_t: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], m * (1.0 - y[0] * y[0]) * y[1] - y[0]]);
    let dt = 1e-3;
    let mut y = DVector::from_vec(vec![2.0, 0.0]);
    // Settle onto the cycle.
    y = rk4(f, y, 0.0, 200.0, 200_000);
    // Next downward crossing of y2 = 0, refined by Newton steps on the partial step length.
    let crossing = |mut y: DVector<f64>| -> (f64, DVector<f64>) {
        let mut t = 0.0;
        loop {
            let next = rk4(f, y.clone(), 0.0, dt, 1);
            if y[1] > 0.0 && next[1] <= 0.0 && t > 10.0 * dt {
                let mut tau = dt * y[1] / (y[1] - next[1]);
                for _ in 0..20 {
                    let z = rk4(f, y.clone(), 0.0, tau, 1);
                    tau -= z[1] / f(0.0, &z)[1];
                }
                return (t + tau, rk4(f, y, 0.0, tau, 1));
            }
            y = next;
            t += dt;
        }
    };
    let (_, start) = crossing(y);
    let (period, _) = crossing(start.clone());
    let sub = (period / intervals as f64 / 1e-3).ceil() as usize;
    let h = period / intervals as f64;
    let mut samples = vec![start.clone()];
    let mut cur = start;
    for _ in 0..intervals {
        cur = rk4(f, cur, 0.0, h, sub);
        samples.push(cur.clone());
    }
    (period, samples)
}
