//! Data ingestion and synthetic problem generators.

use crate::matrix::SparseRowMatrix;

mod libsvm;
mod synth;

pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use synth::{planted_hyperplane, synth_ridge, synth_sparse_classification, Covariance, DEFAULT_NOISE_SIGMA};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub density: f64,
    pub source: String,
}

/// A data matrix with one label or target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub matrix: SparseRowMatrix,
    pub labels: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub(crate) fn new(matrix: SparseRowMatrix, labels: Vec<f64>, name: &str, source: String) -> Self {
        let (n, d) = (matrix.n_rows(), matrix.n_cols());
        let density = if n * d == 0 {
            0.0
        } else {
            matrix.nnz() as f64 / (n * d) as f64
        };
        Self {
            matrix,
            labels,
            meta: DatasetMeta {
                name: name.to_string(),
                n,
                d,
                density,
                source,
            },
        }
    }

    /// True when every label is ±1.
    pub fn is_classification(&self) -> bool {
        self.labels.iter().all(|&b| b == 1.0 || b == -1.0)
    }
}
