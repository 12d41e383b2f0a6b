//! Per-epoch metrics, solver run options and the shared run output.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::problem::{nnz_fraction, CompositeProblem};

/// One row of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Passes over the data: iterations for deterministic methods,
    /// iterations / n for stochastic ones.
    pub epoch: f64,
    /// Unperturbed objective at the reported iterate.
    pub primal_value: f64,
    /// `primal_value − P*`; NaN when no reference value was supplied.
    pub suboptimality: f64,
    pub nnz_fraction: f64,
    /// Cumulative coordinate reads and writes of primal-side vectors.
    pub touches: u64,
    /// Solver time, excluding metric evaluation.
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub iterations: usize,
    /// `P*` of the unperturbed problem, for suboptimality.
    pub reference: Option<f64>,
    /// Record every this many iterations; defaults to one epoch.
    pub trace_every: Option<usize>,
    /// Stop at the first record whose suboptimality is at or below this.
    pub target_suboptimality: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
    /// When false, `elapsed_seconds` is reported as 0 so traces are byte-reproducible.
    pub timing: bool,
}

impl SolveOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            reference: None,
            trace_every: None,
            target_suboptimality: None,
            x0: None,
            y0: None,
            seed: 0,
            timing: true,
        }
    }

    pub fn reference(mut self, p_star: f64) -> Self {
        self.reference = Some(p_star);
        self
    }

    pub fn trace_every(mut self, every: usize) -> Self {
        self.trace_every = Some(every);
        self
    }

    pub fn target(mut self, suboptimality: f64) -> Self {
        self.target_suboptimality = Some(suboptimality);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn y0(mut self, y0: Vec<f64>) -> Self {
        self.y0 = Some(y0);
        self
    }

    pub fn timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }

    pub(crate) fn check(&self, problem: &CompositeProblem) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if self.trace_every == Some(0) {
            return Err(Error::config("trace_every must be at least 1"));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != problem.d() {
                return Err(Error::structural(format!(
                    "x0 has length {}, expected {}",
                    x0.len(),
                    problem.d()
                )));
            }
        }
        if let Some(y0) = &self.y0 {
            if y0.len() != problem.n() {
                return Err(Error::structural(format!(
                    "y0 has length {}, expected {}",
                    y0.len(),
                    problem.n()
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn initial_x(&self, d: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; d])
    }

    pub(crate) fn initial_y(&self, n: usize) -> Vec<f64> {
        self.y0.clone().unwrap_or_else(|| vec![0.0; n])
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Last primal iterate.
    pub x: Vec<f64>,
    /// β-weighted average of the intermediate iterates, where the method keeps one.
    pub ergodic_x: Option<Vec<f64>>,
    pub ergodic_y: Option<Vec<f64>>,
    /// Last dual iterate, in the method's own dual convention.
    pub y: Option<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub touches: u64,
    /// Every resolved constant the run used, for the manifest.
    pub parameters: BTreeMap<String, f64>,
}

/// Evaluates and timestamps trace records while keeping evaluation cost out of the clock.
pub(crate) struct Monitor<'a> {
    problem: &'a CompositeProblem,
    reference: Option<f64>,
    target: Option<f64>,
    timing: bool,
    started: Instant,
    excluded: Duration,
    pub(crate) records: Vec<TraceRecord>,
}

impl<'a> Monitor<'a> {
    pub(crate) fn new(problem: &'a CompositeProblem, opts: &SolveOptions) -> Self {
        Self {
            problem,
            reference: opts.reference,
            target: opts.target_suboptimality,
            timing: opts.timing,
            started: Instant::now(),
            excluded: Duration::ZERO,
            records: Vec::new(),
        }
    }

    /// Appends a record for `x`; returns true when the target has been reached.
    pub(crate) fn record(&mut self, iteration: usize, epoch: f64, x: &[f64], touches: u64) -> Result<bool> {
        let paused = Instant::now();
        let elapsed = if self.timing {
            (paused - self.started - self.excluded).as_secs_f64()
        } else {
            0.0
        };
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration,
                detail: format!("primal coordinate {j} is {}", x[j]),
            });
        }
        let value = self.problem.primal_value_unperturbed(x);
        let sub = self.reference.map_or(f64::NAN, |p| value - p);
        self.records.push(TraceRecord {
            epoch,
            primal_value: value,
            suboptimality: sub,
            nnz_fraction: nnz_fraction(x),
            touches,
            elapsed_seconds: elapsed,
        });
        self.excluded += paused.elapsed();
        Ok(self.target.is_some_and(|t| sub <= t))
    }
}

pub(crate) fn check_finite(iteration: usize, what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|a| !a.is_finite()) {
        None => Ok(()),
        Some(j) => Err(Error::Divergence {
            iteration,
            detail: format!("{what} coordinate {j} is {}", v[j]),
        }),
    }
}
