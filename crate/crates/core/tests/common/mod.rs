//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nlwave::*;
use std::f64::consts::PI;

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `int_0^inf |g|` for `g` smooth on each `[z_k, z_{k+1}]` with
/// `z_k = offset + k pi`, summed over enough periods for `e^{-y}` tails.
pub fn periodic_abs_integral(g: impl Fn(f64) -> f64, offset: f64) -> f64 {
    let mut cuts = vec![0.0];
    cuts.extend((0..60).map(|k| offset + k as f64 * PI).filter(|&z| z > 0.0));
    cuts.windows(2)
        .map(|w| simpson(|y| g(y).abs(), w[0], w[1], 2000))
        .sum()
}

pub fn fitted_order(hs: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub type Matrix = Vec<Vec<f64>>;

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Taylor series with scaling and squaring.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.len();
    let norm = a
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let scale = 0.5f64.powi(squarings);
    let a: Matrix = a
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    let mut term: Matrix = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let mut sum = term.clone();
    for k in 1..30 {
        term = mat_mul(&term, &a);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            for (x, y) in s.iter_mut().zip(t) {
                *x += y;
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

pub fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Linear flux `f(u) = u` on `h = 0.5`: the system, a smooth initial state
/// and `exp(-B) v0`.
pub fn linear_problem(kernel: &Kernel, n_half: usize) -> (TruncatedSystem, StateVector, Vec<f64>) {
    let grid = Grid::new(0.5, n_half).unwrap();
    let system = build_system(
        kernel,
        grid,
        Nonlinearity::linear(),
        DEFAULT_BLOW_UP_THRESHOLD,
    )
    .unwrap();
    let v0 = restrict(
        |x| (-(x - 0.7) * (x - 0.7)).exp() + 0.3 * (2.0 * x).sin() * (-x * x / 8.0).exp(),
        &grid,
    )
    .unwrap();
    let minus_b: Matrix = system
        .matrix()
        .into_iter()
        .map(|r| r.into_iter().map(|v| -v).collect())
        .collect();
    let exact = mat_vec(&expm(&minus_b), v0.values());
    (system, v0, exact)
}
