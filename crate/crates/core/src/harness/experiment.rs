use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ProblemSpec, RunConfig, SolverMethod};
use super::reference::compute_reference;
use super::tracefile::{read_manifest, write_manifest, write_trace};
use crate::baselines::run_baseline;
use crate::dapd::{run_dapd, validate_schedule, Reported, SolverSchedule};
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::sdapd::{run_sdapd, StochasticParams};
use crate::sparse::run_sparse_sdapd;
use crate::trace::{SolveOptions, SolveOutput};

/// Longest horizon checked by the pre-run schedule validation.
const VALIDATION_HORIZON: usize = 100_000;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// SDAPD parameters for `problem` with any of `eta`, `tau`, `beta0`, `xi` replaced.
pub fn stochastic_params(problem: &CompositeProblem, overrides: &BTreeMap<String, f64>) -> Result<StochasticParams> {
    let n = problem.n();
    let all_given = ["eta", "tau", "beta0", "xi"].iter().all(|k| overrides.contains_key(*k));
    let base = if all_given {
        None
    } else {
        Some(StochasticParams::for_problem(problem)?)
    };
    let pick = |k: &str, default: Option<f64>| -> f64 {
        overrides
            .get(k)
            .copied()
            .or(default)
            .expect("either overridden or defaulted")
    };
    StochasticParams::custom(
        n,
        pick("eta", base.map(|b| b.eta)),
        pick("tau", base.map(|b| b.tau)),
        pick("beta0", base.map(|b| b.beta0)),
        pick("xi", base.map(|b| b.xi)),
    )
}

/// Runs one method with its resolved defaults and any overrides.
pub fn run_method(
    method: SolverMethod,
    problem: &CompositeProblem,
    opts: &SolveOptions,
    overrides: &BTreeMap<String, f64>,
    reported: Reported,
) -> Result<SolveOutput> {
    match method {
        SolverMethod::Dapd => {
            let schedule = SolverSchedule::for_problem(problem, overrides.get("tau").copied())?;
            run_dapd(problem, &schedule, opts, reported)
        }
        SolverMethod::Sdapd => {
            if reported == Reported::Ergodic {
                return Err(Error::config(
                    "the lazy sdapd engine reports the last iterate only; use sdapd_dense for ergodic traces",
                ));
            }
            run_sparse_sdapd(problem, &stochastic_params(problem, overrides)?, opts)
        }
        SolverMethod::SdapdDense => run_sdapd(problem, &stochastic_params(problem, overrides)?, opts, reported),
        SolverMethod::Baseline(m) => run_baseline(m, problem, opts, overrides),
    }
}

/// Iterations in `epochs` passes for `method` on a problem with `n` rows.
pub fn iterations_for(method: SolverMethod, epochs: f64, n: usize) -> usize {
    let per_epoch = if method.is_stochastic() { n as f64 } else { 1.0 };
    ((epochs * per_epoch).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Completed,
    Diverged { iteration: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub method: SolverMethod,
    /// `None` for deterministic methods, which run once.
    pub seed: Option<u64>,
    pub label: String,
    pub trace_path: Option<PathBuf>,
    pub status: CellStatus,
    pub iterations: usize,
    pub final_suboptimality: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<CellOutcome>,
    pub manifest_path: PathBuf,
    pub p_star: f64,
}

impl ExperimentReport {
    pub fn diverged(&self) -> bool {
        self.cells.iter().any(|c| c.status != CellStatus::Completed)
    }
}

fn real(x: f64) -> String {
    format!("{x:e}")
}

/// Flattens a TOML value into dotted keys with TOML-literal values.
fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        toml::Value::Float(f) => {
            out.insert(prefix.to_string(), real(*f));
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn problem_keys(spec: &ProblemSpec) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let value = toml::Value::try_from(spec).expect("problem spec serializes");
    flatten("config.problem", &value, &mut out);
    out
}

/// Loads a cached `P*` if the cache was written for the same problem and accuracy.
pub fn read_reference_cache(path: &Path, spec: &ProblemSpec, accuracy: f64) -> Result<Option<f64>> {
    if !path.exists() {
        return Ok(None);
    }
    let cached = read_manifest(path)?;
    let mut expected = problem_keys(spec);
    expected.insert("reference.accuracy".into(), real(accuracy));
    let matches = expected.iter().all(|(k, v)| cached.get(k) == Some(v))
        && cached.keys().filter(|k| k.starts_with("config.problem.")).count()
            == expected.keys().filter(|k| k.starts_with("config.problem.")).count();
    if !matches {
        return Ok(None);
    }
    let p = cached
        .get("reference.p_star")
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("{} has no readable reference.p_star", path.display()),
        })?;
    Ok(Some(p))
}

/// Writes a reference cache readable by [`read_reference_cache`].
pub fn write_reference_cache(
    path: &Path,
    spec: &ProblemSpec,
    accuracy: f64,
    p_star: f64,
    gap: f64,
    method: &str,
) -> Result<()> {
    let mut entries = problem_keys(spec);
    entries.insert("reference.accuracy".into(), real(accuracy));
    entries.insert("reference.p_star".into(), real(p_star));
    entries.insert("reference.gap".into(), real(gap));
    entries.insert("reference.method".into(), method.to_string());
    write_manifest(&entries, path)
}

/// Checks every DAPD schedule condition for the horizon of the run.
fn validate_dapd(problem: &CompositeProblem, overrides: &BTreeMap<String, f64>, iterations: usize) -> Result<()> {
    let schedule = SolverSchedule::for_problem(problem, overrides.get("tau").copied())?;
    let consts = problem.constants();
    let violations = validate_schedule(
        &schedule,
        problem.gamma_deterministic(),
        consts.mu,
        consts.r,
        iterations.min(VALIDATION_HORIZON),
    );
    if let Some(v) = violations.first() {
        return Err(Error::config(format!(
            "dapd schedule infeasible ({} violations), first: {v}",
            violations.len()
        )));
    }
    Ok(())
}

/// Runs every (method, seed) cell of `config`, writing one CSV per cell and a
/// manifest of every resolved constant into `config.output.dir`.
///
/// Divergence is recorded per cell; any other cell failure fails the run.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    config.check()?;
    let base = config.problem.build()?;
    let problem = match config.solver.epsilon {
        Some(eps) => base.perturb(eps, config.solver.c1, config.solver.c2)?,
        None => base.clone(),
    };
    let n = problem.n();

    let mut cells: Vec<(SolverMethod, Option<u64>)> = Vec::new();
    for &m in &config.solver.methods {
        if cells.iter().any(|(c, _)| *c == m) {
            return Err(Error::config(format!("method {m} listed twice")));
        }
        if m.is_stochastic() {
            cells.extend(config.solver.seeds.iter().map(|&s| (m, Some(s))));
        } else {
            cells.push((m, None));
        }
    }
    for &m in &config.solver.methods {
        let ov = config.overrides_for(m);
        match m {
            SolverMethod::Dapd => validate_dapd(&problem, &ov, iterations_for(m, config.budget.epochs, n))?,
            SolverMethod::Sdapd | SolverMethod::SdapdDense => {
                stochastic_params(&problem, &ov)?;
            }
            SolverMethod::Baseline(_) => {}
        }
        if m == SolverMethod::Sdapd && config.output.reported == Reported::Ergodic {
            return Err(Error::config(
                "the lazy sdapd engine has no ergodic iterate; use sdapd_dense",
            ));
        }
    }

    let (p_star, reference_keys) = resolve_reference(config, &base)?;

    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let results: Vec<Result<(CellOutcome, BTreeMap<String, f64>)>> = cells
        .par_iter()
        .map(|&(method, seed)| run_cell(config, &problem, p_star, method, seed))
        .collect();

    let mut manifest = BTreeMap::new();
    let value = toml::Value::try_from(config).expect("config serializes");
    flatten("config", &value, &mut manifest);
    manifest.extend(reference_keys);
    describe_problem(&problem, &mut manifest);
    manifest.insert("build.version".into(), env!("CARGO_PKG_VERSION").into());

    let mut outcomes = Vec::with_capacity(cells.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok((cell, params)) => {
                let key = format!("cell.{}", cell.label);
                for (k, v) in params {
                    manifest.insert(format!("{key}.{k}"), real(v));
                }
                manifest.insert(format!("{key}.iterations"), cell.iterations.to_string());
                let status = match &cell.status {
                    CellStatus::Completed => "completed".to_string(),
                    CellStatus::Diverged { iteration, detail } => {
                        format!("diverged at iteration {iteration}: {detail}")
                    }
                };
                manifest.insert(format!("{key}.status"), status);
                if let Some(p) = &cell.trace_path {
                    let name = p
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    manifest.insert(format!("{key}.trace"), name);
                }
                outcomes.push(cell);
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &manifest_path)?;
    Ok(ExperimentReport {
        cells: outcomes,
        manifest_path,
        p_star,
    })
}

fn resolve_reference(config: &RunConfig, base: &CompositeProblem) -> Result<(f64, BTreeMap<String, String>)> {
    let spec = &config.reference;
    let mut keys = BTreeMap::new();
    if let Some(p) = spec.p_star {
        keys.insert("reference.source".into(), "given".into());
        keys.insert("reference.p_star".into(), real(p));
        return Ok((p, keys));
    }
    if let Some(cache) = &spec.cache {
        if let Some(p) = read_reference_cache(cache, &config.problem, spec.accuracy)? {
            keys.insert("reference.source".into(), format!("cache {}", cache.display()));
            keys.insert("reference.p_star".into(), real(p));
            return Ok((p, keys));
        }
    }
    let r = compute_reference(base, spec.accuracy)?;
    if let Some(cache) = &spec.cache {
        write_reference_cache(cache, &config.problem, spec.accuracy, r.p_star, r.gap, r.method.name())?;
    }
    keys.insert("reference.source".into(), "computed".into());
    keys.insert("reference.method".into(), r.method.name().into());
    keys.insert("reference.p_star".into(), real(r.p_star));
    keys.insert("reference.gap".into(), real(r.gap));
    keys.insert("reference.iterations".into(), r.iterations.to_string());
    Ok((r.p_star, keys))
}

fn describe_problem(problem: &CompositeProblem, out: &mut BTreeMap<String, String>) {
    let c = problem.constants();
    let a = problem.matrix();
    out.insert("problem.n".into(), problem.n().to_string());
    out.insert("problem.d".into(), problem.d().to_string());
    out.insert("problem.nnz".into(), a.nnz().to_string());
    out.insert("problem.density".into(), real(c.density));
    out.insert("problem.r".into(), real(c.r));
    out.insert("problem.r_bar".into(), real(c.r_bar));
    out.insert("problem.spectral_converged".into(), c.spectral_converged.to_string());
    out.insert("problem.gamma".into(), real(c.gamma));
    out.insert("problem.mu".into(), real(c.mu));
    out.insert(
        "problem.gamma_deterministic".into(),
        real(problem.gamma_deterministic()),
    );
    out.insert("problem.gamma_stochastic".into(), real(problem.gamma_stochastic()));
    out.insert("problem.loss_scale".into(), real(problem.loss_scale()));
    out.insert(
        "problem.lipschitz".into(),
        c.lipschitz.map_or_else(|| "none".into(), real),
    );
    out.insert("perturbation.delta1".into(), real(problem.loss().dual_perturbation));
    out.insert("perturbation.delta2".into(), real(problem.reg().primal_perturbation));
}

fn run_cell(
    config: &RunConfig,
    problem: &CompositeProblem,
    p_star: f64,
    method: SolverMethod,
    seed: Option<u64>,
) -> Result<(CellOutcome, BTreeMap<String, f64>)> {
    let n = problem.n();
    let iterations = iterations_for(method, config.budget.epochs, n);
    let per_epoch = if method.is_stochastic() { n } else { 1 };
    let every = (per_epoch / config.budget.records_per_epoch).max(1);
    let mut opts = SolveOptions::new(iterations)
        .reference(p_star)
        .trace_every(every)
        .timing(config.output.timing)
        .seed(seed.unwrap_or(config.solver.seeds[0]));
    if let Some(t) = config.budget.target_suboptimality {
        opts = opts.target(t);
    }
    let label = match seed {
        Some(s) => format!("{}_seed{s}", method.name()),
        None => method.name().to_string(),
    };
    let overrides = config.overrides_for(method);
    match run_method(method, problem, &opts, &overrides, config.output.reported) {
        Ok(out) => {
            let path = config.output.dir.join(format!("{label}.csv"));
            write_trace(&out.trace, &path)?;
            let cell = CellOutcome {
                method,
                seed,
                label,
                trace_path: Some(path),
                status: CellStatus::Completed,
                iterations: out.iterations,
                final_suboptimality: out.trace.last().map(|r| r.suboptimality),
            };
            Ok((cell, out.parameters))
        }
        Err(Error::Divergence { iteration, detail }) => Ok((
            CellOutcome {
                method,
                seed,
                label,
                trace_path: None,
                status: CellStatus::Diverged { iteration, detail },
                iterations: iteration,
                final_suboptimality: None,
            },
            BTreeMap::new(),
        )),
        Err(e) => Err(Error::config(format!("{label}: {e}"))),
    }
}
