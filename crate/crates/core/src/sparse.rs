//! Lazy SDAPD: per-iteration cost proportional to the sampled row's nonzeros.
//!
//! Dense SDAPD adds `β_t(u^t + Δ·a_i)` to the gradient sum `s` every
//! iteration, touching all `d` coordinates. With geometric weights
//! `β_t = β₀θ^{−t}` the sum splits into two vectors that only change on
//! `supp(a_i)`:
//!
//! ```text
//! s^t = v^t + β_{t−1} w^t
//! v  += β_t (n − 1/(1−θ)) δ        w += δ / (1−θ)        δ = (Δ/n) a_i
//! ```
//!
//! starting from `v⁰ = −β₀θ/(1−θ)·u⁰`, `w⁰ = u⁰/(1−θ)` with `u⁰ = (1/n)Aᵀy⁰`.
//! Any primal coordinate can then be recovered on demand in O(1):
//! `x_j = prox_{B_{t−1} g_j}(x⁰_j − s_j)` and `x̄_j = prox_{η g_j}(x_j − η u_j)`.
//!
//! As in the dense solvers, `v`, `β` and `B` are stored divided by a running
//! scale `σ`; `w` and `u` are scale-free.

use std::collections::BTreeMap;

use crate::dapd::{REBASE_PERIOD, REBASE_THRESHOLD};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::rng::SampleStream;
use crate::sdapd::{StochasticParams, SAMPLE_STREAM};
use crate::trace::{Monitor, SolveOptions, SolveOutput};

#[derive(Clone)]
pub struct LazyState<'a> {
    problem: &'a CompositeProblem,
    params: StochasticParams,
    k: f64,
    /// `1/(1−θ) = ξ/(ξ−1)`.
    inv_one_minus_theta: f64,
    x0: Vec<f64>,
    v_hat: Vec<f64>,
    w: Vec<f64>,
    u: Vec<f64>,
    y: Vec<f64>,
    /// `B_{t−1}/σ`; zero before the first iteration.
    b_hat: f64,
    ln_sigma: f64,
    stream: SampleStream,
    t: usize,
    touches: u64,
    rebases: usize,
    rebase_threshold: f64,
    rebase_period: usize,
}

impl<'a> LazyState<'a> {
    /// Computes `Aᵀy⁰` once and seeds the two sequences.
    pub fn new(
        problem: &'a CompositeProblem,
        params: StochasticParams,
        x0: Vec<f64>,
        y0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let theta = params.theta();
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::config(format!("θ = 1/ξ must lie in (0, 1), got {theta}")));
        }
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
        let inv = params.xi / (params.xi - 1.0);
        let mut u = vec![0.0; d];
        if y0.iter().any(|&v| v != 0.0) {
            problem.matrix().mul_transpose_into(&y0, &mut u);
            u.iter_mut().for_each(|v| *v /= n as f64);
        }
        // σ = β₀, so v̂ = −θ/(1−θ)·u⁰
        let v_hat = u.iter().map(|&ui| -theta * inv * ui).collect();
        let w = u.iter().map(|&ui| inv * ui).collect();
        Ok(Self {
            problem,
            params,
            k: problem.sample_scale(),
            inv_one_minus_theta: inv,
            x0,
            v_hat,
            w,
            u,
            y: y0,
            b_hat: 0.0,
            ln_sigma: params.log_beta(0),
            stream: SampleStream::new(seed, SAMPLE_STREAM, n),
            t: 0,
            touches: 0,
            rebases: 0,
            rebase_threshold: REBASE_THRESHOLD,
            rebase_period: REBASE_PERIOD,
        })
    }

    /// Overrides the rebase trigger (scaled-weight threshold and period).
    pub fn with_rebase_policy(mut self, threshold: f64, period: usize) -> Self {
        self.rebase_threshold = threshold;
        self.rebase_period = period.max(1);
        self
    }

    pub fn log_samples(mut self) -> Self {
        self.stream = self.stream.with_log();
        self
    }

    /// `ln β_{t−1}` for the current `t`; `t = 0` gives `ln(β₀θ)`.
    fn log_beta_prev(&self) -> f64 {
        self.params.beta0.ln() + (self.t as f64 - 1.0) * (self.params.xi - 1.0).ln_1p()
    }

    #[inline]
    fn recover(&self, j: usize, p: f64, beta_prev_hat: f64) -> (f64, f64) {
        let reg = self.problem.reg();
        let x = if self.b_hat == 0.0 {
            self.x0[j]
        } else {
            let s_hat = self.v_hat[j] + beta_prev_hat * self.w[j];
            reg.prox_precision(j, p, self.x0[j] * p - s_hat / self.b_hat)
        };
        let eta = self.params.eta;
        (x, reg.prox_step(j, eta, x - eta * self.u[j]))
    }

    fn recovery_scalars(&self) -> (f64, f64) {
        let p = (-(self.ln_sigma + self.b_hat.ln())).exp();
        let beta_prev_hat = (self.log_beta_prev() - self.ln_sigma).exp();
        (p, beta_prev_hat)
    }

    /// `(x_j^t, x̄_j^{t+1})` recovered in O(1).
    pub fn primal_coord(&mut self, j: usize) -> Result<(f64, f64)> {
        if j >= self.x0.len() {
            return Err(Error::structural(format!("coordinate {j} out of range")));
        }
        let (p, bp) = self.recovery_scalars();
        self.touches += 4;
        Ok(self.recover(j, p, bp))
    }

    pub fn step(&mut self) {
        let i = self.stream.next_index();
        self.step_with_index(i);
    }

    pub fn step_with_index(&mut self, i: usize) {
        let problem = self.problem;
        let row = problem.matrix().row(i);
        let (p, bp) = self.recovery_scalars();
        let mut margin = 0.0;
        for (j, a) in row.iter() {
            let (_, xbar) = self.recover(j, p, bp);
            margin += a * xbar;
        }
        let tau = self.params.tau;
        let y_new = problem
            .loss()
            .prox_conjugate_scaled(i, tau, self.y[i] + tau * margin, self.k);
        let delta = y_new - self.y[i];
        self.y[i] = y_new;

        let n = self.params.n as f64;
        let beta_hat = (self.params.log_beta(self.t) - self.ln_sigma).exp();
        let v_coef = beta_hat * (n - self.inv_one_minus_theta);
        if delta != 0.0 {
            for (j, a) in row.iter() {
                let dj = delta / n * a;
                self.u[j] += dj;
                self.v_hat[j] += v_coef * dj;
                self.w[j] += self.inv_one_minus_theta * dj;
            }
        }
        self.b_hat += beta_hat;
        self.t += 1;
        // recovery reads x⁰, v, w, u; the update writes u, v, w
        self.touches += 7 * row.nnz() as u64 + 1;

        let next = self.params.log_beta(self.t) - self.ln_sigma;
        if next > self.rebase_threshold.ln() || self.t.is_multiple_of(self.rebase_period) {
            self.rebase();
        }
    }

    /// Moves the scale `σ` to the current weight. Rescales `v` and `B`;
    /// every recovered coordinate is unchanged up to rounding.
    pub fn rebase(&mut self) {
        let shift = self.params.log_beta(self.t) - self.ln_sigma;
        let factor = (-shift).exp();
        self.v_hat.iter_mut().for_each(|v| *v *= factor);
        self.b_hat *= factor;
        self.ln_sigma += shift;
        self.rebases += 1;
    }

    /// `s^t = v^t + β_{t−1} w^t` in O(d).
    pub fn materialize_s(&self) -> Vec<f64> {
        let sigma = self.ln_sigma.exp();
        let bp = (self.log_beta_prev() - self.ln_sigma).exp();
        self.v_hat
            .iter()
            .zip(&self.w)
            .map(|(v, w)| sigma * (v + bp * w))
            .collect()
    }

    /// All primal coordinates `x^t`, O(d).
    pub fn finalize_x(&self) -> Vec<f64> {
        let (p, bp) = self.recovery_scalars();
        (0..self.x0.len()).map(|j| self.recover(j, p, bp).0).collect()
    }

    /// All intermediate coordinates `x̄^{t+1}` that the next iteration would use.
    pub fn finalize_xbar(&self) -> Vec<f64> {
        let (p, bp) = self.recovery_scalars();
        (0..self.x0.len()).map(|j| self.recover(j, p, bp).1).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        let sigma = self.ln_sigma.exp();
        self.v_hat.iter().map(|v| v * sigma).collect()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn theta(&self) -> f64 {
        self.params.theta()
    }

    pub fn b_prev(&self) -> f64 {
        if self.b_hat == 0.0 {
            0.0
        } else {
            (self.ln_sigma + self.b_hat.ln()).exp()
        }
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn touches(&self) -> u64 {
        self.touches
    }

    pub fn rebases(&self) -> usize {
        self.rebases
    }

    pub fn sampled(&self) -> Option<&[usize]> {
        self.stream.logged()
    }
}

/// Runs lazy SDAPD and returns the last iterate; no ergodic average is kept.
pub fn run_sparse_sdapd(
    problem: &CompositeProblem,
    params: &StochasticParams,
    opts: &SolveOptions,
) -> Result<SolveOutput> {
    opts.check(problem)?;
    let n = problem.n();
    let mut state = LazyState::new(
        problem,
        *params,
        opts.initial_x(problem.d()),
        opts.initial_y(n),
        opts.seed,
    )?;
    let every = opts.trace_every.unwrap_or(n);
    let mut monitor = Monitor::new(problem, opts);
    for t in 1..=opts.iterations {
        state.step();
        if t % every == 0 || t == opts.iterations {
            let x = state.finalize_x();
            if monitor.record(t, t as f64 / n as f64, &x, state.touches())? {
                break;
            }
        }
    }
    let mut parameters: BTreeMap<String, f64> = params.describe();
    parameters.insert("theta".into(), params.theta());
    parameters.insert("rebases".into(), state.rebases() as f64);
    Ok(SolveOutput {
        x: state.finalize_x(),
        ergodic_x: None,
        ergodic_y: None,
        y: Some(state.y.clone()),
        trace: monitor.records,
        iterations: state.t,
        touches: state.touches,
        parameters,
    })
}
