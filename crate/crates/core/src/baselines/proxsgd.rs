//! Proximal stochastic (sub)gradient descent.
//!
//! `x ← prox_{η_t g}(x − η_t ∇φ_i(x))` with
//! `η_t = 1/(μ(t+1) + ζ)` when `μ > 0` and `η_t = 1/(ζ√(t+1))` otherwise,
//! where `ζ` is the largest per-sample smoothness for smooth losses and the
//! per-sample gradient bound `k·R̄` for the hinge loss (subgradient steps).
//! The additive `ζ` caps the first steps, which `1/(μt)` alone would make huge.

use super::{params, sample_lipschitz, sample_slope, sample_smoothness, Overrides};
use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::trace::{Monitor, SolveOptions, SolveOutput};

const STREAM: u64 = 2;

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let zeta = sample_smoothness(problem).unwrap_or_else(|| sample_lipschitz(problem));
    let mu = problem.constants().mu;
    let step_scale = ov.positive("step_scale", 1.0)?;
    let step = |t: usize| -> f64 {
        let t1 = t as f64 + 1.0;
        step_scale
            * if mu > 0.0 {
                1.0 / (mu * t1 + zeta)
            } else {
                1.0 / (zeta * t1.sqrt())
            }
    };

    let reg = problem.reg();
    let (n, d) = (problem.n(), problem.d());
    let a = problem.matrix();
    let mut x = opts.initial_x(d);
    let mut stream = SampleStream::new(opts.seed, STREAM, n);
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        let i = stream.next_index();
        let eta = step(t - 1);
        let slope = sample_slope(problem, i, &x);
        for (j, aij) in a.row(i).iter() {
            x[j] -= eta * slope * aij;
        }
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = reg.prox_step(j, eta, *xj);
        }
        touches += 2 * a.row(i).nnz() as u64 + 2 * d as u64;
        done = t;
        if (t % every == 0 || t == opts.iterations) && monitor.record(t, t as f64 / n as f64, &x, touches)? {
            break;
        }
    }
    Ok(SolveOutput {
        x,
        ergodic_x: None,
        ergodic_y: None,
        y: None,
        trace: monitor.records,
        iterations: done,
        touches,
        parameters: params([("step_0", step(0)), ("zeta", zeta), ("step_scale", step_scale)]),
    })
}
