//! Regularized dual averaging.
//!
//! `x_{t+1} = argmin_x ⟨ḡ_t, x⟩ + g(x) + (β_t/(2t))‖x − x⁰‖²` with `ḡ_t` the
//! running mean of sampled (sub)gradients and `β_t = γ√t`. The default `γ` is
//! the largest per-sample smoothness for smooth losses and the per-sample
//! gradient bound `k·R̄` otherwise.

use super::{params, sample_lipschitz, sample_slope, sample_smoothness, Overrides};
use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::trace::{Monitor, SolveOptions, SolveOutput};

const STREAM: u64 = 1;

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let default_gamma = sample_smoothness(problem).unwrap_or_else(|| sample_lipschitz(problem));
    let gamma = ov.positive("gamma", default_gamma)?;

    let reg = problem.reg();
    let (n, d) = (problem.n(), problem.d());
    let a = problem.matrix();
    let x0 = opts.initial_x(d);
    let mut x = x0.clone();
    let mut gbar = vec![0.0; d];
    let mut stream = SampleStream::new(opts.seed, STREAM, n);
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        let i = stream.next_index();
        let slope = sample_slope(problem, i, &x);
        let tf = t as f64;
        // ḡ_t = ((t−1)ḡ_{t−1} + g_t)/t, split into a dense decay and a sparse add
        gbar.iter_mut().for_each(|g| *g *= (tf - 1.0) / tf);
        for (j, aij) in a.row(i).iter() {
            gbar[j] += slope * aij / tf;
        }
        let p = gamma / tf.sqrt();
        for j in 0..d {
            x[j] = reg.prox_precision(j, p, p * x0[j] - gbar[j]);
        }
        touches += 2 * a.row(i).nnz() as u64 + 4 * d as u64;
        done = t;
        if (t % every == 0 || t == opts.iterations) && monitor.record(t, tf / n as f64, &x, touches)? {
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
        parameters: params([("gamma", gamma)]),
    })
}
