use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::dapd::Reported;
use crate::datasets::{
    read_libsvm, synth_ridge, synth_sparse_classification, Covariance, Dataset, DEFAULT_NOISE_SIGMA,
};
use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, Scaling, DEFAULT_PERTURBATION_C1, DEFAULT_PERTURBATION_C2};
use crate::prox::{LossFamily, LossKind, RegKind, Regularizer};

/// Environment variable naming the directory relative dataset paths are resolved against.
pub const DATA_DIR_ENV: &str = "DAPD_DATA_DIR";

/// A full experiment description. Every field round-trips through TOML and
/// unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub data: DataSpec,
    pub loss: LossKind,
    pub regularizer: RegKind,
    #[serde(default)]
    pub scaling: Scaling,
    /// Lipschitz constant of the scaled loss, replacing the built-in bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Libsvm {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dimension: Option<usize>,
    },
    SynthRidge {
        n: usize,
        d: usize,
        #[serde(default)]
        covariance: Covariance,
        #[serde(default = "default_noise")]
        noise_sigma: f64,
        seed: u64,
    },
    SynthClassification {
        n: usize,
        d: usize,
        density: f64,
        seed: u64,
    },
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub methods: Vec<SolverMethod>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Target accuracy; when set, non-smooth losses and non-strongly-convex
    /// regularizers are perturbed in proportion to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    /// Per-method step-constant overrides, keyed by method name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, BTreeMap<String, f64>>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_c1() -> f64 {
    DEFAULT_PERTURBATION_C1
}

fn default_c2() -> f64 {
    DEFAULT_PERTURBATION_C2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Passes over the data per cell.
    pub epochs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_suboptimality: Option<f64>,
    /// Trace records per epoch.
    #[serde(default = "default_records")]
    pub records_per_epoch: usize,
}

fn default_records() -> usize {
    1
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            epochs: 50.0,
            target_suboptimality: None,
            records_per_epoch: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
    /// Known `P*`; skips the reference solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    /// File holding a previously computed `P*` for this problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

fn default_accuracy() -> f64 {
    1e-10
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            accuracy: default_accuracy(),
            p_star: None,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub reported: Reported,
    /// Record wall-clock time. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("traces")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            reported: Reported::Last,
            timing: false,
        }
    }
}

/// A method runnable from a config: the two DAPD variants, the dense
/// SDAPD reference implementation, or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SolverMethod {
    Dapd,
    /// SDAPD on the lazy sparse engine.
    Sdapd,
    SdapdDense,
    Baseline(Method),
}

impl SolverMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::Dapd => "dapd",
            SolverMethod::Sdapd => "sdapd",
            SolverMethod::SdapdDense => "sdapd_dense",
            SolverMethod::Baseline(m) => m.name(),
        }
    }

    pub fn is_stochastic(self) -> bool {
        match self {
            SolverMethod::Dapd => false,
            SolverMethod::Sdapd | SolverMethod::SdapdDense => true,
            SolverMethod::Baseline(m) => m.is_stochastic(),
        }
    }

    /// Names accepted in `[solver.overrides.<method>]`.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            SolverMethod::Dapd => &["tau"],
            SolverMethod::Sdapd | SolverMethod::SdapdDense => &["eta", "tau", "beta0", "xi"],
            SolverMethod::Baseline(m) => m.parameter_names(),
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dapd" => Ok(SolverMethod::Dapd),
            "sdapd" => Ok(SolverMethod::Sdapd),
            "sdapd_dense" => Ok(SolverMethod::SdapdDense),
            _ => s.parse().map(SolverMethod::Baseline).map_err(|_| {
                Error::config(format!(
                    "unknown method {s:?}; expected dapd, sdapd, sdapd_dense, pdhg, apgm, da, rda, proxsgd, proxsvrg or spdc"
                ))
            }),
        }
    }
}

impl TryFrom<String> for SolverMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SolverMethod> for String {
    fn from(m: SolverMethod) -> String {
        m.name().to_string()
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the cross-field constraints serde cannot express.
    pub fn check(&self) -> Result<()> {
        let s = &self.solver;
        if s.methods.is_empty() {
            return Err(Error::config("solver.methods is empty"));
        }
        if s.seeds.is_empty() {
            return Err(Error::config("solver.seeds is empty"));
        }
        if let Some(e) = s.epsilon {
            if !(e > 0.0) {
                return Err(Error::config(format!("solver.epsilon must be positive, got {e}")));
            }
        }
        if !(s.c1 > 0.0 && s.c2 > 0.0) {
            return Err(Error::config("perturbation constants c1, c2 must be positive"));
        }
        for (name, params) in &s.overrides {
            let method: SolverMethod = name.parse()?;
            if !s.methods.contains(&method) {
                return Err(Error::config(format!(
                    "overrides given for {name}, which is not in solver.methods"
                )));
            }
            if let Some(bad) = params.keys().find(|k| !method.parameter_names().contains(&k.as_str())) {
                return Err(Error::config(format!(
                    "{name} has no parameter {bad:?}; expected one of {:?}",
                    method.parameter_names()
                )));
            }
        }
        let b = &self.budget;
        if !(b.epochs > 0.0 && b.epochs.is_finite()) {
            return Err(Error::config(format!(
                "budget.epochs must be positive, got {}",
                b.epochs
            )));
        }
        if b.records_per_epoch == 0 {
            return Err(Error::config("budget.records_per_epoch must be at least 1"));
        }
        if !(self.reference.accuracy > 0.0) {
            return Err(Error::config(format!(
                "reference.accuracy must be positive, got {}",
                self.reference.accuracy
            )));
        }
        Ok(())
    }

    /// Overrides for `method`, empty when none were given.
    pub fn overrides_for(&self, method: SolverMethod) -> BTreeMap<String, f64> {
        self.solver.overrides.get(method.name()).cloned().unwrap_or_default()
    }
}

/// Resolves a relative dataset path against [`DATA_DIR_ENV`] when it is set.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

impl DataSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSpec::Libsvm { path, dimension } => read_libsvm(resolve_data_path(path), *dimension),
            DataSpec::SynthRidge {
                n,
                d,
                covariance,
                noise_sigma,
                seed,
            } => synth_ridge(*n, *d, *covariance, *noise_sigma, *seed).map(|(ds, _)| ds),
            DataSpec::SynthClassification { n, d, density, seed } => {
                synth_sparse_classification(*n, *d, *density, *seed)
            }
        }
    }
}

impl ProblemSpec {
    /// Loads the data and assembles the unperturbed problem.
    pub fn build(&self) -> Result<CompositeProblem> {
        let ds = self.data.load()?;
        self.build_from(ds)
    }

    pub fn build_from(&self, ds: Dataset) -> Result<CompositeProblem> {
        let loss = match self.loss {
            LossKind::Squared => LossFamily::squared(ds.labels),
            LossKind::Hinge => LossFamily::hinge(ds.labels),
        };
        let problem = CompositeProblem::new(
            ds.matrix,
            loss,
            Regularizer::new(self.regularizer.clone()),
            self.scaling,
        )?;
        Ok(match self.lipschitz {
            Some(l) => problem.with_lipschitz(l),
            None => problem,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        loss = "squared"
        regularizer = { kind = "l2", lambda = 0.01 }
        data = { source = "synth_ridge", n = 20, d = 5, seed = 1 }

        [solver]
        methods = ["sdapd", "proxsgd"]
        seeds = [1, 2, 3]
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.budget.epochs, 50.0);
        assert_eq!(cfg.reference.accuracy, 1e-10);
        assert_eq!(cfg.problem.scaling, Scaling::FiniteSum);
        assert!(!cfg.output.timing);
        assert_eq!(cfg.solver.methods[1], SolverMethod::Baseline(Method::Proxsgd));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("seeds = [1, 2, 3]", "seeds = [1]\nsteps = 4");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("seed = 1 }", "seed = 1, colour = 2 }");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("lambda = 0.01", "lambda = 0.01, l1 = 2");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let bad = MINIMAL.replace("\"proxsgd\"", "\"adam\"");
        let e = RunConfig::from_toml_str(&bad).unwrap_err();
        assert!(e.to_string().contains("adam"), "{e}");
    }

    #[test]
    fn overrides_are_checked_against_method() {
        let ok = format!("{MINIMAL}\n[solver.overrides.sdapd]\nxi = 1.01\n");
        assert!(RunConfig::from_toml_str(&ok).is_ok());
        let bad = format!("{MINIMAL}\n[solver.overrides.sdapd]\nstep = 1.0\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let absent = format!("{MINIMAL}\n[solver.overrides.pdhg]\ntau = 1.0\n");
        assert!(RunConfig::from_toml_str(&absent).is_err());
    }

    #[test]
    fn problem_builds_from_synthetic_recipe() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        let p = cfg.problem.build().unwrap();
        assert_eq!((p.n(), p.d()), (20, 5));
    }
}
