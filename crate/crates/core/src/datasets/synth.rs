use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;

pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

/// Fraction of coordinates in the planted hyperplane's support.
const PLANT_SUPPORT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Covariance {
    #[default]
    Identity,
    /// `Σ = v·I`; `v = 1/d` gives rows of unit expected squared norm.
    Isotropic { variance: f64 },
    /// `Σ_jk = r^{|j−k|}`.
    Ar1 { r: f64 },
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Linear model `b_i = ⟨x*, a_i⟩ + σε_i` with `a_i ~ N(0, Σ)` and `x*` standard normal.
///
/// Returns the dataset (targets in `labels`) and `x*`. Draw order: `x*`, then
/// each row followed by its noise draw.
pub fn synth_ridge(n: usize, d: usize, cov: Covariance, noise_sigma: f64, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::config("synthetic ridge needs n, d ≥ 1"));
    }
    if let Covariance::Ar1 { r } = cov {
        if !(r.abs() < 1.0) {
            return Err(Error::config(format!("ar1 coefficient must be in (−1, 1), got {r}")));
        }
    }
    if let Covariance::Isotropic { variance } = cov {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::config(format!(
                "isotropic variance must be positive, got {variance}"
            )));
        }
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::config(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_star: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(d);
        match cov {
            Covariance::Identity => row.extend((0..d).map(|_| normal(&mut rng))),
            Covariance::Isotropic { variance } => {
                let sd = variance.sqrt();
                row.extend((0..d).map(|_| sd * normal(&mut rng)));
            }
            Covariance::Ar1 { r } => {
                let scale = (1.0 - r * r).sqrt();
                let mut prev = normal(&mut rng);
                row.push(prev);
                for _ in 1..d {
                    prev = r * prev + scale * normal(&mut rng);
                    row.push(prev);
                }
            }
        }
        rows.push(((0..d).collect::<Vec<_>>(), row));
        noise.push(normal(&mut rng));
    }
    let matrix = SparseRowMatrix::from_rows(rows, d)?;
    let labels = (0..n)
        .map(|i| matrix.row(i).dot(&x_star) + noise_sigma * noise[i])
        .collect();
    let source = format!("synth_ridge(n={n}, d={d}, cov={cov:?}, sigma={noise_sigma}, seed={seed})");
    Ok((Dataset::new(matrix, labels, "synth_ridge", source), x_star))
}

/// Sparse rows with `round(ρd)` uniformly placed standard-normal entries,
/// labelled by the sign of a planted sparse hyperplane.
///
/// Rows with zero margin against the plant are redrawn, so the labels are
/// strictly separable by the plant.
pub fn synth_sparse_classification(n: usize, d: usize, density: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::config("synthetic classification needs n, d ≥ 1"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::config(format!("density must be in (0, 1], got {density}")));
    }
    if density * (d as f64) < 1.0 {
        return Err(Error::config(format!(
            "density {density} leaves fewer than one nonzero per row at d={d}"
        )));
    }
    let k = ((density * d as f64).round() as usize).clamp(1, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = draw_plant(&mut rng, d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let mut idx = index::sample(&mut rng, d, k).into_vec();
        idx.sort_unstable();
        let vals: Vec<f64> = idx.iter().map(|_| normal(&mut rng)).collect();
        let margin: f64 = idx.iter().zip(&vals).map(|(&j, v)| plant[j] * v).sum();
        if margin.abs() < 1e-12 {
            continue;
        }
        labels.push(margin.signum());
        rows.push((idx, vals));
    }
    let matrix = SparseRowMatrix::from_rows(rows, d)?;
    let source = format!("synth_sparse_classification(n={n}, d={d}, density={density}, seed={seed})");
    Ok(Dataset::new(matrix, labels, "synth_sparse_classification", source))
}

/// The planted hyperplane used by [`synth_sparse_classification`] for `(d, seed)`.
pub fn planted_hyperplane(d: usize, seed: u64) -> Vec<f64> {
    draw_plant(&mut ChaCha8Rng::seed_from_u64(seed), d)
}

fn draw_plant(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let support = ((PLANT_SUPPORT * d as f64).round() as usize).clamp(1, d);
    let mut plant = vec![0.0; d];
    for j in index::sample(rng, d, support) {
        plant[j] = normal(rng);
    }
    plant
}
