//! Row-compressed sparse matrices and the kernels every solver is built on.
//!
//! A [`SparseRowMatrix`] stores the data matrix `A` (`n_rows × n_cols`) row by
//! row. Rows are what the stochastic solvers sample, so per-row access
//! ([`SparseRowMatrix::row`], [`SparseRowMatrix::row_dot`]) costs only the
//! row's nonzero count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seed of the start vector used by [`SparseRowMatrix::spectral_norm`].
const POWER_ITERATION_SEED: u64 = 0x0005_EED0_FA7A;

pub const DEFAULT_SPECTRAL_REL_TOL: f64 = 1e-9;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one row: parallel slices of column indices and values.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> RowView<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.iter().map(|(j, a)| a * v[j]).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Summary constants of a data matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixStats {
    /// `‖A‖₂`, largest singular value.
    pub spectral_norm: f64,
    /// Largest Euclidean row norm.
    pub max_row_norm: f64,
    /// Fraction of stored entries, `nnz / (n_rows · n_cols)`.
    pub density: f64,
    /// False when power iteration hit its iteration cap.
    pub spectral_converged: bool,
}

impl SparseRowMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Out-of-range indices and repeated `(row, col)` pairs are rejected.
    pub fn from_triplets(triplets: &[(usize, usize, f64)], n_rows: usize, n_cols: usize) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::structural(format!(
                    "entry ({i}, {j}) outside {n_rows}x{n_cols} matrix"
                )));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (i, j, a) = triplets[k];
            if last == Some((i, j)) {
                return Err(Error::structural(format!("duplicate entry ({i}, {j})")));
            }
            last = Some((i, j));
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(a);
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from dense rows, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Result<Self> {
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::structural(format!(
                    "row {i} has length {}, expected {n_cols}",
                    row.len()
                )));
            }
            triplets.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &a)| a != 0.0)
                    .map(|(j, &a)| (i, j, a)),
            );
        }
        Self::from_triplets(&triplets, rows.len(), n_cols)
    }

    /// Assembles a matrix from per-row `(sorted indices, values)` pairs.
    pub(crate) fn from_rows(rows: Vec<(Vec<usize>, Vec<f64>)>, n_cols: usize) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for (i, (idx, val)) in rows.into_iter().enumerate() {
            if idx.len() != val.len() {
                return Err(Error::structural(format!("row {i}: index/value length mismatch")));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::structural(format!(
                    "row {i}: column indices not strictly increasing"
                )));
            }
            if idx.last().is_some_and(|&j| j >= n_cols) {
                return Err(Error::structural(format!("row {i}: column index out of range")));
            }
            col_indices.extend(idx);
            values.extend(val);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row `i`. Panics if `i` is out of range; see [`Self::row_checked`].
    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        RowView {
            indices: &self.col_indices[range.clone()],
            values: &self.values[range],
        }
    }

    pub fn row_checked(&self, i: usize) -> Result<RowView<'_>> {
        if i >= self.n_rows {
            return Err(Error::structural(format!(
                "row {i} out of range for {} rows",
                self.n_rows
            )));
        }
        Ok(self.row(i))
    }

    /// `⟨a_i, v⟩` over the stored entries of row `i`.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> Result<f64> {
        let row = self.row_checked(i)?;
        self.check_len(v.len(), self.n_cols, "vector")?;
        Ok(row.dot(v))
    }

    /// `A v`, or `Aᵀ v` when `transpose` is set.
    pub fn matvec(&self, v: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if transpose {
            self.check_len(v.len(), self.n_rows, "vector")?;
            let mut out = vec![0.0; self.n_cols];
            self.mul_transpose_into(v, &mut out);
            Ok(out)
        } else {
            self.check_len(v.len(), self.n_cols, "vector")?;
            let mut out = vec![0.0; self.n_rows];
            self.mul_into(v, &mut out);
            Ok(out)
        }
    }

    /// `out ← A v`. Lengths are the caller's responsibility.
    pub fn mul_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_rows) {
            *o = self.row(i).dot(v);
        }
    }

    /// `out ← Aᵀ v`. Lengths are the caller's responsibility.
    pub fn mul_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate().take(self.n_rows) {
            if vi != 0.0 {
                self.add_scaled_row(i, vi, out);
            }
        }
    }

    /// `out += alpha · a_i`.
    #[inline]
    pub fn add_scaled_row(&self, i: usize, alpha: f64, out: &mut [f64]) {
        for (j, a) in self.row(i).iter() {
            out[j] += alpha * a;
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).norm_squared().sqrt()).collect()
    }

    /// Multiplies row `i` by `factors[i]` (used to fold labels into rows).
    pub fn scale_rows(&mut self, factors: &[f64]) -> Result<()> {
        self.check_len(factors.len(), self.n_rows, "row factor")?;
        for (i, &f) in factors.iter().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            self.values[range].iter_mut().for_each(|a| *a *= f);
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut row = vec![0.0; self.n_cols];
                for (j, a) in self.row(i).iter() {
                    row[j] = a;
                }
                row
            })
            .collect()
    }

    /// Largest singular value by power iteration on `AᵀA`.
    ///
    /// The start vector is drawn from a fixed-seed generator so the result is
    /// deterministic. Stops once the eigenvalue estimate changes by less than
    /// `rel_tol` (relative); if `max_iter` is reached first the best estimate is
    /// returned with `converged = false`.
    pub fn spectral_norm(&self, rel_tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
        if !(rel_tol > 0.0) {
            return Err(Error::config(format!("rel_tol must be positive, got {rel_tol}")));
        }
        if self.values.iter().all(|&a| a == 0.0) {
            return Ok(SpectralEstimate {
                value: 0.0,
                converged: true,
                iterations: 0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
        let mut v: Vec<f64> = (0..self.n_cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut v);
        let mut av = vec![0.0; self.n_rows];
        let mut atav = vec![0.0; self.n_cols];

        let mut estimate = 0.0f64;
        for k in 1..=max_iter {
            self.mul_into(&v, &mut av);
            self.mul_transpose_into(&av, &mut atav);
            // ‖AᵀA v‖ for unit v; never exceeds σ_max², and dominates ‖Av‖².
            let lambda = norm(&atav).max(dot(&av, &av));
            if lambda == 0.0 {
                // start vector in the null space; restart from a fresh draw
                v.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                normalize(&mut v);
                continue;
            }
            let done = k > 1 && (lambda - estimate).abs() <= rel_tol * lambda;
            estimate = lambda;
            if done {
                return Ok(SpectralEstimate {
                    value: estimate.sqrt(),
                    converged: true,
                    iterations: k,
                });
            }
            v.copy_from_slice(&atav);
            normalize(&mut v);
        }
        Ok(SpectralEstimate {
            value: estimate.sqrt(),
            converged: false,
            iterations: max_iter,
        })
    }

    /// Spectral norm, max row norm and density with default power-iteration settings.
    pub fn stats(&self) -> MatrixStats {
        let max_row_norm = self.row_norms().into_iter().fold(0.0, f64::max);
        let est = self
            .spectral_norm(DEFAULT_SPECTRAL_REL_TOL, DEFAULT_SPECTRAL_MAX_ITER)
            .expect("default tolerance is positive");
        let cells = self.n_rows * self.n_cols;
        let density = if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        };
        MatrixStats {
            // R̄ ≤ R always; the power-iteration estimate approaches R from below
            spectral_norm: est.value.max(max_row_norm),
            max_row_norm,
            density,
            spectral_converged: est.converged,
        }
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got != want {
            return Err(Error::structural(format!(
                "{what} length {got} does not match expected {want}"
            )));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
