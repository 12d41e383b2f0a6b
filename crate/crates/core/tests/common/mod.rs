//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dapd::datasets::{synth_ridge, Covariance};
use dapd::{CompositeProblem, LossFamily, Regularizer, Scaling};
use nalgebra::{DMatrix, DVector};

/// Minimizer of a convex scalar function on `[lo, hi]`: a 2001-point grid
/// scan to bracket the minimum, golden-section refinement, then one parabolic step.
pub fn argmin_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 2000;
    let h = (hi - lo) / GRID as f64;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..=GRID {
        let v = f(lo + k as f64 * h);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let mut a = lo + (best.max(1) - 1) as f64 * h;
    let mut b = lo + (best + 1).min(GRID) as f64 * h;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    let mut mid = 0.5 * (a + b);
    // golden section stalls at ~√ε relative to |f|; shrinking three-point
    // parabolas average that noise out where f is smooth near the minimum
    for scale in [1e-4, 1e-5, 1e-6] {
        let h = scale * (1.0 + mid.abs());
        if mid - h <= lo || mid + h >= hi {
            break;
        }
        let (fm, f0, fp) = (f(mid - h), f(mid), f(mid + h));
        let curv = fp - 2.0 * f0 + fm;
        // a kink inside [mid − h, mid + h] shows up as second differences that
        // do not scale like h²; only trust the parabola where they do
        let half = f(mid + 0.5 * h) - 2.0 * f0 + f(mid - 0.5 * h);
        if curv > 0.0 && (4.0 * half - curv).abs() <= 0.01 * curv {
            let vertex = mid - 0.5 * h * (fp - fm) / curv;
            if (vertex - mid).abs() < h {
                mid = vertex;
            }
        }
    }
    // the grid endpoints may beat the interior on a boundary minimum
    [mid, lo, hi]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

pub fn dense(problem: &CompositeProblem) -> DMatrix<f64> {
    let rows = problem.matrix().to_dense();
    DMatrix::from_fn(problem.n(), problem.d(), |i, j| rows[i][j])
}

/// `argmin c/2‖Ax − b‖² + λ/2‖x‖²` by LU on the normal equations.
pub fn ridge_oracle(problem: &CompositeProblem, lambda: f64) -> Vec<f64> {
    let a = dense(problem);
    let b = DVector::from_column_slice(&problem.loss().targets);
    let c = problem.loss_scale();
    let m = a.transpose() * &a * c + DMatrix::identity(problem.d(), problem.d()) * lambda;
    let x = m.lu().solve(&(a.transpose() * b * c)).expect("nonsingular");
    x.iter().copied().collect()
}

pub fn ridge(n: usize, d: usize, lambda: f64, scaling: Scaling, seed: u64) -> CompositeProblem {
    let (ds, _) = synth_ridge(n, d, Covariance::Identity, 0.1, seed).unwrap();
    CompositeProblem::new(
        ds.matrix,
        LossFamily::squared(ds.labels),
        Regularizer::l2(lambda),
        scaling,
    )
    .unwrap()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Least-squares slope of `ln values[k]` against `k`.
pub fn log_slope(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let xs: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
