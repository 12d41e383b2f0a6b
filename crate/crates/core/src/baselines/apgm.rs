//! Accelerated proximal gradient.
//!
//! Step `1/ζ` with `ζ = R²/γ` the smoothness of the full loss. Momentum is
//! `(1 − √q)/(1 + √q)` with `q = μ/(ζ + μ)` when `μ > 0`, and the FISTA
//! sequence `(t_k − 1)/t_{k+1}` otherwise.

use super::{full_smoothness, params, Overrides};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::trace::{Monitor, SolveOptions, SolveOutput};

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let zeta = full_smoothness(problem)
        .ok_or_else(|| Error::config("apgm needs a smooth loss (γ > 0); perturb the problem or pick another method"))?;
    let mu = problem.constants().mu;
    let step = ov.positive("step", 1.0 / zeta)?;
    let fixed_momentum = if mu > 0.0 {
        let q = (mu / (1.0 / step + mu)).sqrt();
        Some((1.0 - q) / (1.0 + q))
    } else {
        None
    };
    let fixed_momentum = ov.get("momentum").or(fixed_momentum);

    let reg = problem.reg();
    let d = problem.d();
    let nnz = problem.matrix().nnz() as u64;
    let mut x = opts.initial_x(d);
    let mut x_prev = x.clone();
    let mut z = x.clone();
    let mut tk = 1.0f64;
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(1);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        let grad = problem.loss_gradient(&z);
        for j in 0..d {
            x_prev[j] = x[j];
            x[j] = reg.prox_step(j, step, z[j] - step * grad[j]);
        }
        let m = match fixed_momentum {
            Some(m) => m,
            None => {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
                let m = (tk - 1.0) / next;
                tk = next;
                m
            }
        };
        for j in 0..d {
            z[j] = x[j] + m * (x[j] - x_prev[j]);
        }
        touches += 2 * nnz + 6 * d as u64;
        done = t;
        if (t % every == 0 || t == opts.iterations) && monitor.record(t, t as f64, &x, touches)? {
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
        parameters: params([("step", step), ("momentum", fixed_momentum.unwrap_or(f64::NAN))]),
    })
}
