//! Primal-dual hybrid gradient with extrapolation on the primal side.
//!
//! ```text
//! y ← prox_{σ f*}(y + σ A x̄)
//! x⁺ ← prox_{τ g}(x − τ Aᵀy)
//! x̄ ← x⁺ + θ(x⁺ − x)
//! ```
//!
//! With `μ, γ > 0`: `τ = √(γ/μ)/R`, `σ = √(μ/γ)/R`, `θ = 1/(1 + 2√(μγ)/R)` (linear rate).
//! With only `μ > 0`: `τ₀ = σ₀ = 1/R`, then `θ_k = 1/√(1 + 2μτ_k)`, `τ ← θτ`, `σ ← σ/θ`.
//! Otherwise `τ = σ = 1/R`, `θ = 1`. In every case `στR² ≤ 1`.

use super::{params, Overrides};
use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::trace::{check_finite, Monitor, SolveOptions, SolveOutput};

pub(super) fn run(problem: &CompositeProblem, opts: &SolveOptions, ov: &Overrides) -> Result<SolveOutput> {
    let a = problem.matrix();
    let (reg, loss) = (problem.reg(), problem.loss());
    let consts = problem.constants();
    let (gamma, mu, r) = (problem.gamma_deterministic(), consts.mu, consts.r);
    let c = problem.loss_scale();

    let strongly_both = gamma > 0.0 && mu > 0.0;
    let adaptive = !strongly_both && mu > 0.0 && ov.get("theta").is_none();
    let (tau0, sigma0, theta0) = if strongly_both {
        (
            (gamma / mu).sqrt() / r,
            (mu / gamma).sqrt() / r,
            1.0 / (1.0 + 2.0 * (mu * gamma).sqrt() / r),
        )
    } else {
        (1.0 / r, 1.0 / r, 1.0)
    };
    let mut tau = ov.positive("tau", tau0)?;
    let mut sigma = ov.positive("sigma", sigma0)?;
    let theta_fixed = ov.positive("theta", theta0)?;
    let (tau_init, sigma_init) = (tau, sigma);

    let (n, d) = (problem.n(), problem.d());
    let mut x = opts.initial_x(d);
    let mut xbar = x.clone();
    let mut y = opts.initial_y(n);
    let mut ax = vec![0.0; n];
    let mut aty = vec![0.0; d];
    let mut touches = 0u64;
    let every = opts.trace_every.unwrap_or(1);
    let mut monitor = Monitor::new(problem, opts);
    let mut done = 0;
    for t in 1..=opts.iterations {
        a.mul_into(&xbar, &mut ax);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = loss.prox_conjugate_scaled(i, sigma, *yi + sigma * ax[i], c);
        }
        a.mul_transpose_into(&y, &mut aty);
        let theta = if adaptive {
            1.0 / (1.0 + 2.0 * mu * tau).sqrt()
        } else {
            theta_fixed
        };
        for j in 0..d {
            let xn = reg.prox_step(j, tau, x[j] - tau * aty[j]);
            xbar[j] = xn + theta * (xn - x[j]);
            x[j] = xn;
        }
        if adaptive {
            tau *= theta;
            sigma /= theta;
        }
        touches += 3 * a.nnz() as u64 + 5 * d as u64;
        done = t;
        if t % every == 0 || t == opts.iterations {
            check_finite(t, "dual", &y)?;
            if monitor.record(t, t as f64, &x, touches)? {
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
        parameters: params([
            ("tau", tau_init),
            ("sigma", sigma_init),
            ("theta", theta_fixed),
            ("adaptive", if adaptive { 1.0 } else { 0.0 }),
        ]),
    })
}
