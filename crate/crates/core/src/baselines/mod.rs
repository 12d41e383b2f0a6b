//! Comparison solvers on the same problem model and trace schema.
//!
//! Step rules follow each method's original reference and are fixed rather
//! than tuned; every resolved constant is returned in
//! [`SolveOutput::parameters`]. Individual constants can be overridden by
//! name (see [`Method::parameter_names`]).
//!
//! | method | source of the step rule |
//! |---|---|
//! | PDHG | Chambolle & Pock 2011, Algorithms 1–3 |
//! | APGM | Nesterov accelerated proximal gradient / FISTA (Beck & Teboulle 2009) |
//! | DA | Nesterov 2009 dual averaging with `O(1/√t)` weights |
//! | RDA | Xiao 2010 regularized dual averaging, `β_t = γ√t` |
//! | ProxSGD | proximal stochastic (sub)gradient, `O(1/(μt))` or `O(1/√t)` steps |
//! | ProxSVRG | Xiao & Zhang 2014, `η = 0.1/L_Q`, `m = 2n`, averaged snapshot |
//! | SPDC | Zhang & Xiao 2017, single-coordinate variant |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::trace::{SolveOptions, SolveOutput};

mod apgm;
mod da;
mod pdhg;
mod proxsgd;
mod rda;
mod spdc;
mod svrg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pdhg,
    Apgm,
    Da,
    Rda,
    Proxsgd,
    Proxsvrg,
    Spdc,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Pdhg,
        Method::Apgm,
        Method::Da,
        Method::Rda,
        Method::Proxsgd,
        Method::Proxsvrg,
        Method::Spdc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pdhg => "pdhg",
            Method::Apgm => "apgm",
            Method::Da => "da",
            Method::Rda => "rda",
            Method::Proxsgd => "proxsgd",
            Method::Proxsvrg => "proxsvrg",
            Method::Spdc => "spdc",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Rda | Method::Proxsgd | Method::Proxsvrg | Method::Spdc)
    }

    /// Names accepted as step-parameter overrides.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Method::Pdhg => &["tau", "sigma", "theta"],
            Method::Apgm => &["step", "momentum"],
            Method::Da => &["beta_scale"],
            Method::Rda => &["gamma"],
            Method::Proxsgd => &["step_scale"],
            Method::Proxsvrg => &["eta", "inner"],
            Method::Spdc => &["tau", "sigma", "theta"],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown baseline method {s:?}")))
    }
}

/// Runs `method` on `problem`. `overrides` replaces named step constants.
pub fn run_baseline(
    method: Method,
    problem: &CompositeProblem,
    opts: &SolveOptions,
    overrides: &BTreeMap<String, f64>,
) -> Result<SolveOutput> {
    opts.check(problem)?;
    if let Some(bad) = overrides
        .keys()
        .find(|k| !method.parameter_names().contains(&k.as_str()))
    {
        return Err(Error::config(format!(
            "{method} has no parameter {bad:?}; expected one of {:?}",
            method.parameter_names()
        )));
    }
    let ov = Overrides(overrides);
    match method {
        Method::Pdhg => pdhg::run(problem, opts, &ov),
        Method::Apgm => apgm::run(problem, opts, &ov),
        Method::Da => da::run(problem, opts, &ov),
        Method::Rda => rda::run(problem, opts, &ov),
        Method::Proxsgd => proxsgd::run(problem, opts, &ov),
        Method::Proxsvrg => svrg::run(problem, opts, &ov),
        Method::Spdc => spdc::run(problem, opts, &ov),
    }
}

struct Overrides<'a>(&'a BTreeMap<String, f64>);

impl Overrides<'_> {
    fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key).unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config(format!("{key} must be positive and finite, got {v}")))
        }
    }
}

/// Stochastic gradient of `φ_i(⟨a_i, x⟩)` is `k·f̃_i'(⟨a_i, x⟩)·a_i`; returns the scalar factor.
#[inline]
fn sample_slope(problem: &CompositeProblem, i: usize, x: &[f64]) -> f64 {
    let margin = problem.matrix().row(i).dot(x);
    problem.sample_scale() * problem.loss().derivative(i, margin)
}

/// Smoothness of the full loss `c·Σ f̃_i(⟨a_i, x⟩)`: `R²/γ_det`, or `None` when non-smooth.
fn full_smoothness(problem: &CompositeProblem) -> Option<f64> {
    let g = problem.gamma_deterministic();
    let r = problem.constants().r;
    (g > 0.0).then(|| r * r / g)
}

/// Largest per-sample smoothness `k·‖a_i‖²/γ`, or `None` when non-smooth.
fn sample_smoothness(problem: &CompositeProblem) -> Option<f64> {
    let g = problem.gamma_stochastic();
    let rb = problem.constants().r_bar;
    (g > 0.0).then(|| rb * rb / g)
}

/// Bound on a stochastic subgradient norm for the Lipschitz losses: `k·R̄`.
fn sample_lipschitz(problem: &CompositeProblem) -> f64 {
    problem.sample_scale() * problem.constants().r_bar
}

fn params<const N: usize>(entries: [(&str, f64); N]) -> BTreeMap<String, f64> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
