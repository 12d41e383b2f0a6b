//! Stochastic primal-dual coordinate method, one dual coordinate per iteration.
//!
//! ```text
//! y_k ← prox_{σ φ_k*}(y_k + σ⟨a_k, x̄⟩)
//! x⁺  ← prox_{τ g}(x − τ(u + Δ a_k))        u = (1/n)Aᵀy before the update
//! u  ← u + (Δ/n) a_k
//! x̄  ← x⁺ + θ(x⁺ − x)
//! ```
//!
//! `τ = √(γ/(nμ))/(2R̄)`, `σ = √(nμ/γ)/(2R̄)`, `θ = 1 − 1/(n + 2R̄√(n/(μγ)))`,
//! with `γ` the per-sample constant of `φ_k`. Needs `γ, μ > 0`.

use super::{params, Overrides};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::trace::{check_finite, Monitor, SolveOptions, SolveOutput};

const STREAM: u64 = 4;

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let consts = problem.constants();
    let (gamma, mu, rb) = (problem.gamma_stochastic(), consts.mu, consts.r_bar);
    if !(gamma > 0.0 && mu > 0.0) {
        return Err(Error::config(format!(
            "spdc needs γ > 0 and μ > 0 (got γ={gamma}, μ={mu}); perturb the problem first"
        )));
    }
    let (n, d) = (problem.n(), problem.d());
    let nf = n as f64;
    let tau = ov.positive("tau", (gamma / (nf * mu)).sqrt() / (2.0 * rb))?;
    let sigma = ov.positive("sigma", (nf * mu / gamma).sqrt() / (2.0 * rb))?;
    let theta = ov.positive("theta", 1.0 - 1.0 / (nf + 2.0 * rb * (nf / (mu * gamma)).sqrt()))?;

    let reg = problem.reg();
    let loss = problem.loss();
    let a = problem.matrix();
    let k_scale = problem.sample_scale();
    let mut x = opts.initial_x(d);
    let mut xbar = x.clone();
    let mut y = opts.initial_y(n);
    let mut u = a.matvec(&y, true)?;
    u.iter_mut().for_each(|v| *v /= nf);
    let mut stream = SampleStream::new(opts.seed, STREAM, n);
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        let k = stream.next_index();
        let row = a.row(k);
        let margin = row.dot(&xbar);
        let yk = loss.prox_conjugate_scaled(k, sigma, y[k] + sigma * margin, k_scale);
        let delta = yk - y[k];
        y[k] = yk;
        let mut r = 0;
        for j in 0..d {
            let mut g = u[j];
            if r < row.nnz() && row.indices[r] == j {
                g += delta * row.values[r];
                r += 1;
            }
            let xn = reg.prox_step(j, tau, x[j] - tau * g);
            xbar[j] = xn + theta * (xn - x[j]);
            x[j] = xn;
        }
        for (j, aj) in row.iter() {
            u[j] += delta / nf * aj;
        }
        touches += 3 * row.nnz() as u64 + 5 * d as u64;
        done = t;
        if t % every == 0 || t == opts.iterations {
            check_finite(t, "dual", &y)?;
            if monitor.record(t, t as f64 / nf, &x, touches)? {
                break;
            }
        }
    }
    Ok(SolveOutput {
        x,
        ergodic_x: None,
        ergodic_y: None,
        y: Some(y),
        trace: monitor.records,
        iterations: done,
        touches,
        parameters: params([("tau", tau), ("sigma", sigma), ("theta", theta)]),
    })
}
