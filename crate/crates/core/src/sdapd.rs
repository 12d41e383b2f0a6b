//! Stochastic dual-averaging primal-dual method, dense reference implementation.
//!
//! Works in the stochastic dual convention of [`crate::problem`]: the dual
//! variable `y` pairs with `φ_i = k·f_i` and the coupling term is `(1/n)⟨y, Ax⟩`.
//! One row `i` is sampled per iteration; only `y_i` changes, and the
//! extrapolated dual `ȳ = y^t + n(y^{t+1} − y^t)` feeds the dual-averaged
//! gradient sum through `(1/n)Aᵀȳ = u^t + Δ·a_i`, with `u^t = (1/n)Aᵀy^t`
//! and `Δ = y_i^{t+1} − y_i^t`.

use std::collections::BTreeMap;

use crate::dapd::{Reported, REBASE_PERIOD, REBASE_THRESHOLD};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::trace::{check_finite, Monitor, SolveOptions, SolveOutput};

/// Stream id shared by the dense and lazy implementations, so equal seeds draw equal rows.
pub const SAMPLE_STREAM: u64 = 0;

/// Fixed steps `η, τ` and geometric weights `β_t = β₀ ξ^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticParams {
    pub eta: f64,
    pub tau: f64,
    pub beta0: f64,
    pub xi: f64,
    pub n: usize,
}

impl StochasticParams {
    /// `η = √(γ/(nμ))/R̄`, `τ = √(nμ/γ)/R̄`, `β₀ = η`, `ξ = 1 + 1/(n + R̄√(n/(μγ)))`.
    pub fn new(n: usize, gamma: f64, mu: f64, r_bar: f64) -> Result<Self> {
        if !(gamma > 0.0 && mu > 0.0) {
            return Err(Error::config(format!(
                "stochastic steps need γ > 0 and μ > 0 (got γ={gamma}, μ={mu}); perturb the problem first"
            )));
        }
        if n == 0 || !(r_bar > 0.0 && r_bar.is_finite()) {
            return Err(Error::config(format!("need n ≥ 1 and R̄ > 0, got n={n}, R̄={r_bar}")));
        }
        let nf = n as f64;
        let eta = (gamma / (nf * mu)).sqrt() / r_bar;
        let tau = (nf * mu / gamma).sqrt() / r_bar;
        let xi = 1.0 + 1.0 / (nf + r_bar * (nf / (mu * gamma)).sqrt());
        Ok(Self {
            eta,
            tau,
            beta0: eta,
            xi,
            n,
        })
    }

    /// Parameters for `problem` from its stochastic-convention constants.
    pub fn for_problem(problem: &CompositeProblem) -> Result<Self> {
        let c = problem.constants();
        Self::new(problem.n(), problem.gamma_stochastic(), c.mu, c.r_bar)
    }

    /// Arbitrary fixed steps with geometric weights; `ξ > 1` required.
    pub fn custom(n: usize, eta: f64, tau: f64, beta0: f64, xi: f64) -> Result<Self> {
        if !(eta > 0.0 && tau > 0.0 && beta0 > 0.0) || !(xi > 1.0 && xi.is_finite()) || n == 0 {
            return Err(Error::config(format!(
                "invalid stochastic parameters η={eta}, τ={tau}, β₀={beta0}, ξ={xi}, n={n}"
            )));
        }
        Ok(Self { eta, tau, beta0, xi, n })
    }

    /// `θ = 1/ξ`.
    pub fn theta(&self) -> f64 {
        1.0 / self.xi
    }

    pub fn log_beta(&self, t: usize) -> f64 {
        self.beta0.ln() + t as f64 * (self.xi - 1.0).ln_1p()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.log_beta(t).exp()
    }

    pub fn describe(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("eta".to_string(), self.eta),
            ("tau".to_string(), self.tau),
            ("beta_0".to_string(), self.beta0),
            ("xi".to_string(), self.xi),
        ])
    }
}

/// Dense SDAPD state with step-by-step access.
#[derive(Clone)]
pub struct SdapdSolver<'a> {
    problem: &'a CompositeProblem,
    params: StochasticParams,
    k: f64,
    x0: Vec<f64>,
    x: Vec<f64>,
    xbar: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    s_hat: Vec<f64>,
    b_hat: f64,
    ln_sigma: f64,
    ergodic_x: Vec<f64>,
    stream: SampleStream,
    t: usize,
    touches: u64,
    rebases: usize,
    last_index: Option<usize>,
}

impl<'a> SdapdSolver<'a> {
    pub fn new(
        problem: &'a CompositeProblem,
        params: StochasticParams,
        x0: Vec<f64>,
        y0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let (n, d) = (problem.n(), problem.d());
        if x0.len() != d || y0.len() != n {
            return Err(Error::structural("initial point has the wrong dimensions"));
        }
        if params.n != n {
            return Err(Error::config(format!(
                "parameters built for n={}, problem has n={n}",
                params.n
            )));
        }
        let mut u = problem.matrix().matvec(&y0, true)?;
        u.iter_mut().for_each(|v| *v /= n as f64);
        Ok(Self {
            problem,
            params,
            k: problem.sample_scale(),
            x: x0.clone(),
            xbar: x0.clone(),
            ergodic_x: x0.clone(),
            s_hat: vec![0.0; d],
            x0,
            y: y0,
            u,
            b_hat: 0.0,
            ln_sigma: params.log_beta(0),
            stream: SampleStream::new(seed, SAMPLE_STREAM, n),
            t: 0,
            touches: 0,
            rebases: 0,
            last_index: None,
        })
    }

    /// Records every sampled index; see [`Self::sampled`].
    pub fn log_samples(mut self) -> Self {
        self.stream = self.stream.with_log();
        self
    }

    pub fn step(&mut self) {
        let i = self.stream.next_index();
        self.step_with_index(i);
    }

    /// One iteration with a caller-chosen row, bypassing the sampler.
    pub fn step_with_index(&mut self, i: usize) {
        let problem = self.problem;
        let reg = problem.reg();
        let row = problem.matrix().row(i);
        let (eta, tau, n) = (self.params.eta, self.params.tau, self.params.n as f64);
        let d = self.x.len() as u64;
        let nnz = row.nnz() as u64;

        for j in 0..self.xbar.len() {
            self.xbar[j] = reg.prox_step(j, eta, self.x[j] - eta * self.u[j]);
        }
        let margin = row.dot(&self.xbar);
        let y_new = problem
            .loss()
            .prox_conjugate_scaled(i, tau, self.y[i] + tau * margin, self.k);
        let delta = y_new - self.y[i];
        self.y[i] = y_new;

        // s += β_t (u^t + Δ a_i), using u before its own update
        let beta_hat = (self.params.log_beta(self.t) - self.ln_sigma).exp();
        for (s, u) in self.s_hat.iter_mut().zip(&self.u) {
            *s += beta_hat * u;
        }
        for (j, a) in row.iter() {
            self.s_hat[j] += beta_hat * delta * a;
            self.u[j] += delta / n * a;
        }
        self.b_hat += beta_hat;
        let w = beta_hat / self.b_hat;
        for (e, xb) in self.ergodic_x.iter_mut().zip(&self.xbar) {
            *e += w * (xb - *e);
        }
        self.recover_x();
        self.t += 1;
        self.last_index = Some(i);
        // x̄: 3d, dot: nnz, s: 2d + nnz, u: nnz, ergodic: 2d, recovery: 3d
        self.touches += 10 * d + 3 * nnz;

        let next = self.params.log_beta(self.t) - self.ln_sigma;
        if next > REBASE_THRESHOLD.ln() || self.t.is_multiple_of(REBASE_PERIOD) {
            self.rebase();
        }
    }

    fn recover_x(&mut self) {
        let reg = self.problem.reg();
        let p = (-(self.ln_sigma + self.b_hat.ln())).exp();
        for j in 0..self.x.len() {
            let q = self.x0[j] * p - self.s_hat[j] / self.b_hat;
            self.x[j] = reg.prox_precision(j, p, q);
        }
    }

    pub fn rebase(&mut self) {
        let shift = self.params.log_beta(self.t) - self.ln_sigma;
        let factor = (-shift).exp();
        self.s_hat.iter_mut().for_each(|s| *s *= factor);
        self.b_hat *= factor;
        self.ln_sigma += shift;
        self.rebases += 1;
    }

    pub fn params(&self) -> &StochasticParams {
        &self.params
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `u^t = (1/n)Aᵀy^t`, maintained incrementally.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn ergodic_x(&self) -> &[f64] {
        &self.ergodic_x
    }

    /// `s^t = Σ_{k<t} (β_k/n) Aᵀȳ^{k+1}`.
    pub fn grad_sum(&self) -> Vec<f64> {
        let sigma = self.ln_sigma.exp();
        self.s_hat.iter().map(|s| s * sigma).collect()
    }

    /// `B_{t−1}`.
    pub fn b_prev(&self) -> f64 {
        (self.ln_sigma + self.b_hat.ln()).exp()
    }

    pub fn last_index(&self) -> Option<usize> {
        self.last_index
    }

    pub fn sampled(&self) -> Option<&[usize]> {
        self.stream.logged()
    }

    pub fn touches(&self) -> u64 {
        self.touches
    }

    pub fn rebases(&self) -> usize {
        self.rebases
    }
}

/// Runs dense SDAPD; records one trace row per epoch of `n` iterations by default.
pub fn run_sdapd(
    problem: &CompositeProblem,
    params: &StochasticParams,
    opts: &SolveOptions,
    reported: Reported,
) -> Result<SolveOutput> {
    opts.check(problem)?;
    let n = problem.n();
    let mut solver = SdapdSolver::new(
        problem,
        *params,
        opts.initial_x(problem.d()),
        opts.initial_y(n),
        opts.seed,
    )?;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    for t in 1..=opts.iterations {
        solver.step();
        if t % every == 0 || t == opts.iterations {
            check_finite(t, "dual", solver.y())?;
            let x = match reported {
                Reported::Last => solver.x(),
                Reported::Ergodic => solver.ergodic_x(),
            };
            if monitor.record(t, t as f64 / n as f64, x, solver.touches())? {
                break;
            }
        }
    }
    let mut parameters = params.describe();
    parameters.insert("rebases".into(), solver.rebases as f64);
    Ok(SolveOutput {
        iterations: solver.t,
        touches: solver.touches,
        trace: monitor.records,
        ergodic_x: Some(solver.ergodic_x),
        ergodic_y: None,
        y: Some(solver.y),
        x: solver.x,
        parameters,
    })
}
