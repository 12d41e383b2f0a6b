//! Composite convex optimization with dual-averaging primal-dual methods.
//!
//! The crate solves
//!
//! ```text
//! min_x  c · Σ_i f_i(⟨a_i, x⟩) + Σ_j g_j(x_j)
//! ```
//!
//! for squared and hinge losses and separable regularizers (l1, l2, elastic
//! net, Huber, KL). It provides
//!
//! * [`dapd`]: the deterministic dual-averaging primal-dual method with its
//!   four step-size regimes and a feasibility checker;
//! * [`sdapd`]: the stochastic variant, sampling one row per iteration;
//! * [`sparse`]: a lazy implementation of the stochastic variant whose
//!   per-iteration cost is proportional to the sampled row's nonzero count;
//! * [`baselines`]: PDHG, APGM, DA, RDA, ProxSGD, ProxSVRG and SPDC;
//! * [`datasets`] and [`harness`]: LIBSVM input, synthetic generators,
//!   reference solutions, CSV traces and experiment manifests.
//!
//! ```
//! use dapd::{CompositeProblem, LossFamily, Regularizer, Scaling, SparseRowMatrix};
//! use dapd::dapd::{run_dapd, Reported, SolverSchedule};
//! use dapd::SolveOptions;
//!
//! // min ½(x − 1)² + ½x², minimized at x = ½
//! let problem = CompositeProblem::new(
//!     SparseRowMatrix::identity(1),
//!     LossFamily::squared(vec![1.0]),
//!     Regularizer::l2(1.0),
//!     Scaling::Deterministic,
//! )?;
//! let schedule = SolverSchedule::for_problem(&problem, None)?;
//! let out = run_dapd(&problem, &schedule, &SolveOptions::new(100), Reported::Last)?;
//! assert!((out.x[0] - 0.5).abs() < 1e-8);
//! # Ok::<(), dapd::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dapd;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod sdapd;
pub mod sparse;
pub mod trace;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
pub use matrix::{MatrixStats, SparseRowMatrix};
pub use problem::{CompositeProblem, ProblemConstants, Scaling};
pub use prox::{LossFamily, LossKind, RegKind, Regularizer};
pub use trace::{SolveOptions, SolveOutput, TraceRecord};
