//! Proximal SVRG.
//!
//! Outer loop: snapshot `x̃` and full gradient `∇f(x̃)`. Inner loop of `m`
//! steps: `x ← prox_{ηg}(x − η(∇φ_i(x) − ∇φ_i(x̃) + ∇f(x̃)))`. The next
//! snapshot is the average of the inner iterates. Defaults `η = 0.1/L_Q`
//! (`L_Q` the largest per-sample smoothness) and `m = 2n`.

use super::{params, sample_slope, sample_smoothness, Overrides};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::trace::{Monitor, SolveOptions, SolveOutput};

const STREAM: u64 = 3;

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let lq = sample_smoothness(problem).ok_or_else(|| {
        Error::config("proxsvrg needs a smooth loss (γ > 0); perturb the problem or pick another method")
    })?;
    let eta = ov.positive("eta", 0.1 / lq)?;
    let (n, d) = (problem.n(), problem.d());
    let inner = ov.positive("inner", 2.0 * n as f64)?.round().max(1.0) as usize;

    let reg = problem.reg();
    let a = problem.matrix();
    let nnz = a.nnz() as u64;
    let mut x = opts.initial_x(d);
    let mut snapshot = x.clone();
    let mut full_grad = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut stream = SampleStream::new(opts.seed, STREAM, n);
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    let mut k = inner;
    for t in 1..=opts.iterations {
        if k == inner {
            full_grad = problem.loss_gradient(&snapshot);
            x.copy_from_slice(&snapshot);
            avg.iter_mut().for_each(|v| *v = 0.0);
            k = 0;
            touches += 2 * nnz + 2 * d as u64;
        }
        let i = stream.next_index();
        let diff = sample_slope(problem, i, &x) - sample_slope(problem, i, &snapshot);
        let row = a.row(i);
        let mut r = 0;
        for j in 0..d {
            let mut g = full_grad[j];
            if r < row.nnz() && row.indices[r] == j {
                g += diff * row.values[r];
                r += 1;
            }
            x[j] = reg.prox_step(j, eta, x[j] - eta * g);
            avg[j] += x[j];
        }
        k += 1;
        if k == inner {
            let m = inner as f64;
            for (s, v) in snapshot.iter_mut().zip(&avg) {
                *s = v / m;
            }
        }
        touches += 2 * row.nnz() as u64 + 4 * d as u64;
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
        parameters: params([("eta", eta), ("inner", inner as f64)]),
    })
}
