//! Deterministic dual-averaging primal-dual method.
//!
//! Each iteration takes a proximal gradient step to an intermediate point
//! `x̄`, a dual prox step at `x̄`, and then recomputes `x` by dual averaging:
//! `x = prox_{B g}(x⁰ − s)` with `s` the β-weighted sum of all past `Aᵀy`.
//!
//! `β_t` grows geometrically in the strongly convex, smooth regime and
//! overflows `f64` after a few thousand iterations, so the solver stores
//! `β`, `B` and `s` divided by a running scale `σ` (kept as `ln σ`) and
//! renormalizes whenever the scaled weight gets large. The primal recovery
//! only needs `B` and `s/B`, both of which are scale-free.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::trace::{check_finite, Monitor, SolveOptions, SolveOutput};

/// Renormalize once the scaled weight exceeds this.
pub const REBASE_THRESHOLD: f64 = 1e150;
/// Renormalize at least this often.
pub const REBASE_PERIOD: usize = 1 << 20;

const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `γ > 0, μ > 0`: linear convergence.
    StronglyConvexSmooth,
    /// `γ > 0, μ = 0`.
    SmoothOnly,
    /// `γ = 0, μ > 0`.
    StronglyConvexOnly,
    /// `γ = 0, μ = 0`.
    Neither,
}

impl Regime {
    pub fn select(gamma: f64, mu: f64) -> Self {
        match (gamma > 0.0, mu > 0.0) {
            (true, true) => Regime::StronglyConvexSmooth,
            (true, false) => Regime::SmoothOnly,
            (false, true) => Regime::StronglyConvexOnly,
            (false, false) => Regime::Neither,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::StronglyConvexSmooth => "strongly_convex_smooth",
            Regime::SmoothOnly => "smooth_only",
            Regime::StronglyConvexOnly => "strongly_convex_only",
            Regime::Neither => "neither",
        }
    }
}

/// Step-size sequences `(η_t, τ_t, β_t)`.
///
/// `log_beta` must be accurate even where `beta` overflows; the solver only uses it.
pub trait StepSchedule {
    fn eta(&self, t: usize) -> f64;
    fn tau(&self, t: usize) -> f64;
    fn beta(&self, t: usize) -> f64 {
        self.log_beta(t).exp()
    }
    fn log_beta(&self, t: usize) -> f64;
}

/// The parameter choices for the four regularity regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSchedule {
    pub regime: Regime,
    pub gamma: f64,
    pub mu: f64,
    pub r: f64,
    /// Constant dual step of the [`Regime::Neither`] case.
    pub tau_const: f64,
}

impl SolverSchedule {
    /// Selects the regime from `(γ, μ)` and builds its schedule.
    ///
    /// `lipschitz` must be known in the two regimes with `μ = 0`;
    /// `case_iv_tau` defaults to 1.
    pub fn new(gamma: f64, mu: f64, lipschitz: Option<f64>, r: f64, case_iv_tau: Option<f64>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::config(format!("R must be positive and finite, got {r}")));
        }
        if !(gamma >= 0.0 && mu >= 0.0 && gamma.is_finite() && mu.is_finite()) {
            return Err(Error::config(format!("invalid constants γ={gamma}, μ={mu}")));
        }
        let regime = Regime::select(gamma, mu);
        if matches!(regime, Regime::SmoothOnly | Regime::Neither) && lipschitz.is_none() {
            return Err(Error::config(format!(
                "regime {} needs the Lipschitz constant of the loss",
                regime.name()
            )));
        }
        let tau_const = case_iv_tau.unwrap_or(1.0);
        if !(tau_const > 0.0 && tau_const.is_finite()) {
            return Err(Error::config(format!(
                "constant dual step must be positive, got {tau_const}"
            )));
        }
        Ok(Self {
            regime,
            gamma,
            mu,
            r,
            tau_const,
        })
    }

    /// Schedule for DAPD on `problem`, using the deterministic-convention `γ`.
    pub fn for_problem(problem: &CompositeProblem, case_iv_tau: Option<f64>) -> Result<Self> {
        let c = problem.constants();
        Self::new(problem.gamma_deterministic(), c.mu, c.lipschitz, c.r, case_iv_tau)
    }

    /// Geometric growth factor `1 + √(μγ)/R` of the strongly convex, smooth regime.
    pub fn growth(&self) -> f64 {
        1.0 + (self.mu * self.gamma).sqrt() / self.r
    }

    /// `B_t = Σ_{k≤t} β_k` in closed form (may overflow to `∞`).
    pub fn running_b(&self, t: usize) -> f64 {
        let t = t as f64;
        let r2 = self.r * self.r;
        match self.regime {
            Regime::StronglyConvexSmooth => {
                let q = self.growth();
                self.eta(0) * (q.powf(t + 1.0) - 1.0) / (q - 1.0)
            }
            Regime::SmoothOnly => self.gamma / (3.0 * r2) * (t + 1.0) * (t + 2.0) / 2.0,
            Regime::StronglyConvexOnly => (t + 1.0) * (t + 2.0) / self.mu,
            Regime::Neither => (t + 1.0) / (self.tau_const * r2),
        }
    }

    pub fn describe(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("eta_0".into(), self.eta(0));
        m.insert("tau_0".into(), self.tau(0));
        m.insert("beta_0".into(), self.beta(0));
        if self.regime == Regime::StronglyConvexSmooth {
            m.insert("beta_growth".into(), self.growth());
        }
        if self.regime == Regime::Neither {
            m.insert("tau_const".into(), self.tau_const);
        }
        m
    }
}

impl StepSchedule for SolverSchedule {
    fn eta(&self, t: usize) -> f64 {
        let (r2, t1) = (self.r * self.r, t as f64 + 1.0);
        match self.regime {
            Regime::StronglyConvexSmooth => (self.gamma / self.mu).sqrt() / self.r,
            Regime::SmoothOnly => self.gamma * t1 / (3.0 * r2),
            Regime::StronglyConvexOnly => 4.0 / (self.mu * t1),
            Regime::Neither => 1.0 / (self.tau_const * r2),
        }
    }

    fn tau(&self, t: usize) -> f64 {
        let (r2, t1) = (self.r * self.r, t as f64 + 1.0);
        match self.regime {
            Regime::StronglyConvexSmooth => (self.mu / self.gamma).sqrt() / self.r,
            Regime::SmoothOnly => 3.0 / (self.gamma * t1),
            Regime::StronglyConvexOnly => self.mu * t1 / (4.0 * r2),
            Regime::Neither => self.tau_const,
        }
    }

    fn beta(&self, t: usize) -> f64 {
        match self.regime {
            Regime::StronglyConvexSmooth => self.eta(0) * self.growth().powi(t as i32),
            Regime::SmoothOnly | Regime::Neither => self.eta(t),
            Regime::StronglyConvexOnly => 2.0 * (t as f64 + 1.0) / self.mu,
        }
    }

    fn log_beta(&self, t: usize) -> f64 {
        match self.regime {
            Regime::StronglyConvexSmooth => {
                self.eta(0).ln() + t as f64 * ((self.mu * self.gamma).sqrt() / self.r).ln_1p()
            }
            _ => self.beta(t).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `η_t(1 + B_{t−1}μ) ≥ β_t`.
    BetaBound,
    /// `η_t τ_t ≤ 1/R²`.
    StepProduct,
    /// `β_{t+1}/τ_{t+1} ≤ (β_t/τ_t)(1 + γτ_t)`.
    DualRatio,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::BetaBound => "eta_t (1 + B_{t-1} mu) >= beta_t",
            Condition::StepProduct => "eta_t tau_t <= 1/R^2",
            Condition::DualRatio => "beta_{t+1}/tau_{t+1} <= (beta_t/tau_t)(1 + gamma tau_t)",
        })
    }
}

/// A failed feasibility check, in scale-free form: the condition is `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={}: {} fails ({:e} > {:e})",
            self.t, self.condition, self.lhs, self.rhs
        )
    }
}

/// Checks the three step-size conditions for `t = 0..=horizon`.
///
/// Each check is divided through by `β_t` (or its own scale), so geometric
/// schedules are validated without overflow. A relative slack of `1e-9` absorbs rounding.
pub fn validate_schedule(schedule: &dyn StepSchedule, gamma: f64, mu: f64, r: f64, horizon: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let tol = 1.0 + FEASIBILITY_SLACK;
    // ratio = B_{t−1}/β_t
    let mut ratio = 0.0;
    let mut prev_log_beta = f64::NAN;
    for t in 0..=horizon {
        let (eta, tau, log_beta) = (schedule.eta(t), schedule.tau(t), schedule.log_beta(t));
        if t > 0 {
            ratio = (ratio + 1.0) * (prev_log_beta - log_beta).exp();
        }
        prev_log_beta = log_beta;

        // divided by β_t: 1 ≤ η_t/β_t + η_t μ B_{t−1}/β_t
        let rhs = (eta.ln() - log_beta).exp() + eta * mu * ratio;
        if 1.0 > rhs * tol {
            out.push(Violation {
                condition: Condition::BetaBound,
                t,
                lhs: 1.0,
                rhs,
            });
        }

        let lhs = eta * tau * r * r;
        if lhs > tol {
            out.push(Violation {
                condition: Condition::StepProduct,
                t,
                lhs,
                rhs: 1.0,
            });
        }

        if t < horizon {
            let lhs = (schedule.log_beta(t + 1) - log_beta).exp() * tau / schedule.tau(t + 1);
            let rhs = 1.0 + gamma * tau;
            if lhs > rhs * tol {
                out.push(Violation {
                    condition: Condition::DualRatio,
                    t,
                    lhs,
                    rhs,
                });
            }
        }
    }
    out
}

/// DAPD iterate state with step-by-step access.
pub struct DapdSolver<'a> {
    problem: &'a CompositeProblem,
    schedule: &'a dyn StepSchedule,
    c: f64,
    x0: Vec<f64>,
    x: Vec<f64>,
    xbar: Vec<f64>,
    y: Vec<f64>,
    /// `s / σ`.
    s_hat: Vec<f64>,
    /// `B_{t−1} / σ`.
    b_hat: f64,
    ln_sigma: f64,
    ergodic_x: Vec<f64>,
    ergodic_y: Vec<f64>,
    aty: Vec<f64>,
    ax: Vec<f64>,
    t: usize,
    touches: u64,
    rebases: usize,
}

impl<'a> DapdSolver<'a> {
    pub fn new(
        problem: &'a CompositeProblem,
        schedule: &'a dyn StepSchedule,
        x0: Vec<f64>,
        y0: Vec<f64>,
    ) -> Result<Self> {
        let (n, d) = (problem.n(), problem.d());
        if x0.len() != d || y0.len() != n {
            return Err(Error::structural("initial point has the wrong dimensions"));
        }
        Ok(Self {
            problem,
            schedule,
            c: problem.loss_scale(),
            x: x0.clone(),
            xbar: x0.clone(),
            ergodic_x: x0.clone(),
            ergodic_y: y0.clone(),
            s_hat: vec![0.0; d],
            x0,
            y: y0,
            b_hat: 0.0,
            ln_sigma: schedule.log_beta(0),
            aty: vec![0.0; d],
            ax: vec![0.0; n],
            t: 0,
            touches: 0,
            rebases: 0,
        })
    }

    /// One iteration `t → t + 1`.
    pub fn step(&mut self) {
        let a = self.problem.matrix();
        let reg = self.problem.reg();
        let loss = self.problem.loss();
        let t = self.t;
        let (eta, tau) = (self.schedule.eta(t), self.schedule.tau(t));

        a.mul_transpose_into(&self.y, &mut self.aty);
        for (j, xb) in self.xbar.iter_mut().enumerate() {
            *xb = reg.prox_step(j, eta, self.x[j] - eta * self.aty[j]);
        }
        a.mul_into(&self.xbar, &mut self.ax);
        for (i, yi) in self.y.iter_mut().enumerate() {
            *yi = loss.prox_conjugate_scaled(i, tau, *yi + tau * self.ax[i], self.c);
        }
        a.mul_transpose_into(&self.y, &mut self.aty);

        let beta_hat = (self.schedule.log_beta(t) - self.ln_sigma).exp();
        for (s, g) in self.s_hat.iter_mut().zip(&self.aty) {
            *s += beta_hat * g;
        }
        self.b_hat += beta_hat;
        let w = beta_hat / self.b_hat;
        for (e, xb) in self.ergodic_x.iter_mut().zip(&self.xbar) {
            *e += w * (xb - *e);
        }
        for (e, yi) in self.ergodic_y.iter_mut().zip(&self.y) {
            *e += w * (yi - *e);
        }
        self.recover_x();
        self.t += 1;
        self.touches += 3 * a.nnz() as u64 + 4 * self.x.len() as u64;

        let next = self.schedule.log_beta(self.t) - self.ln_sigma;
        if next > REBASE_THRESHOLD.ln() || self.t.is_multiple_of(REBASE_PERIOD) {
            self.rebase();
        }
    }

    /// `x_j = prox_{B g_j}(x0_j − s_j)` written in precision form with `B = σ·B̂`.
    fn recover_x(&mut self) {
        let reg = self.problem.reg();
        let ln_b = self.ln_sigma + self.b_hat.ln();
        let p = (-ln_b).exp();
        for j in 0..self.x.len() {
            let q = self.x0[j] * p - self.s_hat[j] / self.b_hat;
            self.x[j] = reg.prox_precision(j, p, q);
        }
    }

    /// Moves the scale so that the next weight is 1; exact up to rounding.
    pub fn rebase(&mut self) {
        let shift = self.schedule.log_beta(self.t) - self.ln_sigma;
        let factor = (-shift).exp();
        self.s_hat.iter_mut().for_each(|s| *s *= factor);
        self.b_hat *= factor;
        self.ln_sigma += shift;
        self.rebases += 1;
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Intermediate point `x̄^t` of the last completed iteration.
    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn ergodic_x(&self) -> &[f64] {
        &self.ergodic_x
    }

    pub fn ergodic_y(&self) -> &[f64] {
        &self.ergodic_y
    }

    /// `B_{t−1}`; may be `∞` for long geometric runs.
    pub fn b_prev(&self) -> f64 {
        (self.ln_sigma + self.b_hat.ln()).exp()
    }

    /// `s = Σ_{k<t} β_k Aᵀy^{k+1}`; may overflow for long geometric runs.
    pub fn grad_sum(&self) -> Vec<f64> {
        let sigma = self.ln_sigma.exp();
        self.s_hat.iter().map(|s| s * sigma).collect()
    }

    pub fn touches(&self) -> u64 {
        self.touches
    }

    pub fn rebases(&self) -> usize {
        self.rebases
    }

    fn check(&self) -> Result<()> {
        check_finite(self.t, "dual", &self.y)?;
        check_finite(self.t, "primal", &self.x)
    }
}

/// Which iterate the trace reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reported {
    #[default]
    Last,
    Ergodic,
}

/// Runs DAPD with its regime schedule; the trace has one record per iteration by default.
pub fn run_dapd(
    problem: &CompositeProblem,
    schedule: &SolverSchedule,
    opts: &SolveOptions,
    reported: Reported,
) -> Result<SolveOutput> {
    opts.check(problem)?;
    let mut solver = DapdSolver::new(
        problem,
        schedule,
        opts.initial_x(problem.d()),
        opts.initial_y(problem.n()),
    )?;
    let every = opts.trace_every.unwrap_or(1);
    let mut monitor = Monitor::new(problem, opts);
    for t in 1..=opts.iterations {
        solver.step();
        if t % every == 0 || t == opts.iterations {
            solver.check()?;
            let x = match reported {
                Reported::Last => solver.x(),
                Reported::Ergodic => solver.ergodic_x(),
            };
            if monitor.record(t, t as f64, x, solver.touches())? {
                break;
            }
        }
    }
    let mut parameters = schedule.describe();
    parameters.insert("rebases".into(), solver.rebases() as f64);
    Ok(SolveOutput {
        iterations: solver.iteration(),
        touches: solver.touches(),
        trace: monitor.records,
        ergodic_x: Some(solver.ergodic_x),
        ergodic_y: Some(solver.ergodic_y),
        y: Some(solver.y),
        x: solver.x,
        parameters,
    })
}
