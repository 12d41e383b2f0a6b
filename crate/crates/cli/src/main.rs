//! `dapd`: run, check and inspect benchmark configurations.
//!
//! Every verb reads a TOML run configuration. Typed flags and `--set
//! key=value` pairs overwrite fields before the configuration is validated,
//! so the file on disk plus the command line fully determine a run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dapd::dapd::{validate_schedule, SolverSchedule};
use dapd::datasets::read_libsvm;
use dapd::harness::{
    compute_reference, iterations_for, read_reference_cache, run_experiment, stochastic_params, write_reference_cache,
    CellStatus, RunConfig, SolverMethod, DATA_DIR_ENV,
};
use dapd::CompositeProblem;

/// Schedules are checked over at most this many iterations.
const VALIDATE_HORIZON: usize = 100_000;

#[derive(Parser)]
#[command(name = "dapd", version, about = "Dual-averaging primal-dual solvers and baselines")]
#[command(
    after_help = "Exit status: 0 on success, 1 when a cell diverged or a schedule is infeasible, 2 on any other error."
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run every (method, seed) cell and write CSV traces plus a manifest.
    Run(ConfigArgs),
    /// Report step-size feasibility for each configured method without running it.
    Validate(ConfigArgs),
    /// Compute the reference optimum and store it in the reference cache.
    Reference {
        #[command(flatten)]
        config: ConfigArgs,
        /// Recompute even when the cache already holds a matching value.
        #[arg(long)]
        force: bool,
    },
    /// Print size, density and norm constants of a dataset.
    Stats {
        /// Run configuration whose problem is inspected.
        #[arg(required_unless_present = "libsvm", conflicts_with = "libsvm")]
        config: Option<PathBuf>,
        /// Inspect a LIBSVM file directly instead (gzip is detected).
        #[arg(long, value_name = "FILE")]
        libsvm: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Directory relative dataset paths are resolved against [env: DAPD_DATA_DIR].
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// solver.methods, comma separated.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// solver.seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// solver.epsilon
    #[arg(long)]
    epsilon: Option<f64>,
    /// solver.c1
    #[arg(long)]
    c1: Option<f64>,
    /// solver.c2
    #[arg(long)]
    c2: Option<f64>,
    /// budget.epochs
    #[arg(long)]
    epochs: Option<f64>,
    /// budget.records_per_epoch
    #[arg(long)]
    records_per_epoch: Option<i64>,
    /// budget.target_suboptimality
    #[arg(long)]
    target_suboptimality: Option<f64>,
    /// reference.accuracy
    #[arg(long)]
    accuracy: Option<f64>,
    /// reference.p_star
    #[arg(long)]
    p_star: Option<f64>,
    /// reference.cache
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// output.dir
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// output.reported
    #[arg(long, value_enum)]
    reported: Option<ReportedArg>,
    /// output.timing
    #[arg(long)]
    timing: bool,
    /// Set any field by dotted path, e.g. `problem.regularizer.lambda=0.01`.
    /// The value is read as a TOML literal, falling back to a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportedArg {
    Last,
    Ergodic,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        set_data_dir(self.data_dir.as_deref());
        let text =
            std::fs::read_to_string(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        let mut table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing {}", self.config.display()))?;
        for (key, value) in self.assignments()? {
            assign(&mut table, &key, value)?;
        }
        let config = RunConfig::from_toml_str(&table.to_string())
            .with_context(|| format!("invalid configuration {}", self.config.display()))?;
        Ok(config)
    }

    fn assignments(&self) -> Result<Vec<(String, toml::Value)>> {
        use toml::Value;
        let path = |p: &Path| Value::String(p.display().to_string());
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Value| out.push((k.to_string(), v));
        if !self.methods.is_empty() {
            put(
                "solver.methods",
                Value::Array(self.methods.iter().cloned().map(Value::String).collect()),
            );
        }
        if !self.seeds.is_empty() {
            let seeds = self.seeds.iter().map(|&s| i64::try_from(s).map(Value::Integer));
            put(
                "solver.seeds",
                Value::Array(seeds.collect::<Result<_, _>>().context("seed exceeds i64")?),
            );
        }
        let reals = [
            ("solver.epsilon", self.epsilon),
            ("solver.c1", self.c1),
            ("solver.c2", self.c2),
            ("budget.epochs", self.epochs),
            ("budget.target_suboptimality", self.target_suboptimality),
            ("reference.accuracy", self.accuracy),
            ("reference.p_star", self.p_star),
        ];
        for (k, v) in reals {
            if let Some(v) = v {
                put(k, Value::Float(v));
            }
        }
        if let Some(r) = self.records_per_epoch {
            put("budget.records_per_epoch", Value::Integer(r));
        }
        if let Some(c) = &self.cache {
            put("reference.cache", path(c));
        }
        if let Some(o) = &self.out {
            put("output.dir", path(o));
        }
        if let Some(r) = self.reported {
            let name = match r {
                ReportedArg::Last => "last",
                ReportedArg::Ergodic => "ergodic",
            };
            put("output.reported", Value::String(name.into()));
        }
        if self.timing {
            put("output.timing", Value::Boolean(true));
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
            put(k.trim(), parse_literal(v.trim()));
        }
        Ok(out)
    }
}

fn set_data_dir(dir: Option<&Path>) {
    if let Some(dir) = dir {
        // before any worker thread exists
        std::env::set_var(DATA_DIR_ENV, dir);
    }
}

fn parse_literal(text: &str) -> toml::Value {
    // parse as the right-hand side of a one-key document
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn assign(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .with_context(|| format!("empty key {key:?}"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .with_context(|| format!("cannot set {key}: {p} is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// The problem the solvers see, perturbed when `solver.epsilon` is set.
fn solver_problem(config: &RunConfig) -> Result<(CompositeProblem, CompositeProblem)> {
    let base = config.problem.build()?;
    let solved = match config.solver.epsilon {
        Some(eps) => base.perturb(eps, config.solver.c1, config.solver.c2)?,
        None => base.clone(),
    };
    Ok((base, solved))
}

fn run(args: &ConfigArgs) -> Result<bool> {
    let config = args.load()?;
    let report = run_experiment(&config)?;
    println!("p_star = {:e}", report.p_star);
    for cell in &report.cells {
        match &cell.status {
            CellStatus::Completed => {
                let sub = cell
                    .final_suboptimality
                    .map_or_else(|| "-".into(), |s| format!("{s:.3e}"));
                println!(
                    "{:<24} completed  iterations={:<10} suboptimality={sub}",
                    cell.label, cell.iterations
                );
            }
            CellStatus::Diverged { iteration, detail } => {
                println!("{:<24} DIVERGED   at iteration {iteration}: {detail}", cell.label);
            }
        }
    }
    println!("manifest: {}", report.manifest_path.display());
    Ok(!report.diverged())
}

fn validate(args: &ConfigArgs) -> Result<bool> {
    let config = args.load()?;
    let (_, problem) = solver_problem(&config)?;
    let c = problem.constants();
    println!(
        "problem: n={} d={} gamma={:e} mu={:e} R={:e} R_bar={:e}",
        problem.n(),
        problem.d(),
        c.gamma,
        c.mu,
        c.r,
        c.r_bar
    );
    let mut feasible = true;
    for &method in &config.solver.methods {
        let overrides = config.overrides_for(method);
        let horizon = iterations_for(method, config.budget.epochs, problem.n());
        match method {
            SolverMethod::Dapd => {
                let schedule = match SolverSchedule::for_problem(&problem, overrides.get("tau").copied()) {
                    Ok(s) => s,
                    Err(e) => {
                        println!("dapd: no schedule: {e}");
                        feasible = false;
                        continue;
                    }
                };
                let checked = horizon.min(VALIDATE_HORIZON);
                let violations = validate_schedule(&schedule, problem.gamma_deterministic(), c.mu, c.r, checked);
                println!("dapd: regime {:?}, {checked} iterations checked", schedule.regime);
                if violations.is_empty() {
                    println!("  feasible");
                } else {
                    feasible = false;
                    println!("  {} violations", violations.len());
                    for v in violations.iter().take(5) {
                        println!("  {v}");
                    }
                }
            }
            SolverMethod::Sdapd | SolverMethod::SdapdDense => match stochastic_params(&problem, &overrides) {
                Ok(p) => println!(
                    "{method}: eta={:e} tau={:e} beta0={:e} xi={:e}, {horizon} iterations",
                    p.eta, p.tau, p.beta0, p.xi
                ),
                Err(e) => {
                    feasible = false;
                    println!("{method}: infeasible: {e}");
                }
            },
            SolverMethod::Baseline(_) => {
                println!("{method}: no schedule conditions, {horizon} iterations");
            }
        }
    }
    Ok(feasible)
}

fn reference(args: &ConfigArgs, force: bool) -> Result<bool> {
    let config = args.load()?;
    let accuracy = config.reference.accuracy;
    let cache = config
        .reference
        .cache
        .clone()
        .unwrap_or_else(|| config.output.dir.join("reference.txt"));
    if !force {
        if let Some(p) = read_reference_cache(&cache, &config.problem, accuracy)? {
            println!("p_star = {p:e} (cached in {})", cache.display());
            return Ok(true);
        }
    }
    let base = config.problem.build()?;
    let r = compute_reference(&base, accuracy)?;
    if let Some(dir) = cache.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_reference_cache(&cache, &config.problem, accuracy, r.p_star, r.gap, r.method.name())?;
    println!("p_star = {:e}", r.p_star);
    println!("gap = {:e}", r.gap);
    println!("method = {}", r.method.name());
    println!("iterations = {}", r.iterations);
    println!("cache = {}", cache.display());
    Ok(true)
}

fn stats(config: Option<&Path>, libsvm: Option<&Path>, data_dir: Option<&Path>) -> Result<bool> {
    set_data_dir(data_dir);
    let (matrix, labels, name) = match (config, libsvm) {
        (_, Some(path)) => {
            let ds = read_libsvm(dapd::harness::resolve_data_path(path), None)?;
            (ds.matrix, ds.labels, ds.meta.name)
        }
        (Some(path), None) => {
            let config = RunConfig::load(path)?;
            let ds = config.problem.data.load()?;
            (ds.matrix, ds.labels, ds.meta.source)
        }
        (None, None) => bail!("give a configuration or --libsvm"),
    };
    let s = matrix.stats();
    let classes = labels.iter().all(|&b| b == 1.0 || b == -1.0);
    println!("dataset = {name}");
    println!("n = {}", matrix.n_rows());
    println!("d = {}", matrix.n_cols());
    println!("nnz = {}", matrix.nnz());
    println!("density = {:e}", s.density);
    println!("R = {:e}", s.spectral_norm);
    println!("R_bar = {:e}", s.max_row_norm);
    println!("spectral_converged = {}", s.spectral_converged);
    if classes {
        let pos = labels.iter().filter(|&&b| b > 0.0).count();
        println!("labels = +1: {pos}, -1: {}", labels.len() - pos);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Run(args) => run(args),
        Verb::Validate(args) => validate(args),
        Verb::Reference { config, force } => reference(config, *force),
        Verb::Stats {
            config,
            libsvm,
            data_dir,
        } => stats(config.as_deref(), libsvm.as_deref(), data_dir.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_fall_back_to_strings() {
        assert_eq!(parse_literal("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_literal("3"), toml::Value::Integer(3));
        assert_eq!(parse_literal("[1, 2]").as_array().unwrap().len(), 2);
        assert_eq!(parse_literal("hinge"), toml::Value::String("hinge".into()));
        assert_eq!(parse_literal("\"l1\""), toml::Value::String("l1".into()));
    }

    #[test]
    fn dotted_assignment_creates_tables() {
        let mut t = toml::Table::new();
        assign(&mut t, "solver.overrides.apgm.step", toml::Value::Float(2.0)).unwrap();
        assert_eq!(t["solver"]["overrides"]["apgm"]["step"].as_float(), Some(2.0));
        assign(&mut t, "a", toml::Value::Integer(1)).unwrap();
        assert!(assign(&mut t, "a.b", toml::Value::Integer(1)).is_err());
        assert!(assign(&mut t, "x.", toml::Value::Integer(1)).is_err());
    }
}
