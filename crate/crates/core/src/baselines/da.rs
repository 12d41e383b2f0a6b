//! Dual averaging with `O(1/√t)` weights.
//!
//! `x_{k+1} = argmin_x ⟨S_k, x⟩ + B_k g(x) + ½‖x − x⁰‖²` with
//! `S_k = Σ_{i≤k} β_i ∇f(x_i)` and `B_k = Σ_{i≤k} β_i`. Weights are
//! `β_k = 1/(ζ√(k+1))` for smooth losses and `1/(G√(k+1))` otherwise, where
//! `G = L·R` bounds the loss gradient norm.

use super::{full_smoothness, params, Overrides};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::trace::{Monitor, SolveOptions, SolveOutput};

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let consts = problem.constants();
    let scale = match full_smoothness(problem) {
        Some(zeta) => zeta,
        None => {
            let l = consts
                .lipschitz
                .ok_or_else(|| Error::config("da on a non-smooth loss needs its Lipschitz constant"))?;
            l * consts.r
        }
    };
    let beta_scale = ov.positive("beta_scale", 1.0 / scale)?;

    let reg = problem.reg();
    let d = problem.d();
    let nnz = problem.matrix().nnz() as u64;
    let x0 = opts.initial_x(d);
    let mut x = x0.clone();
    let mut s = vec![0.0; d];
    let mut b = 0.0;
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(1);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        let beta = beta_scale / (t as f64).sqrt();
        let grad = problem.loss_gradient(&x);
        for (sj, gj) in s.iter_mut().zip(&grad) {
            *sj += beta * gj;
        }
        b += beta;
        let p = 1.0 / b;
        for j in 0..d {
            x[j] = reg.prox_precision(j, p, (x0[j] - s[j]) * p);
        }
        touches += 2 * nnz + 5 * d as u64;
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
        parameters: params([("beta_scale", beta_scale)]),
    })
}
