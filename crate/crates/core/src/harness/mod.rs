//! Experiment driver: TOML run configurations, certified reference values,
//! per-cell CSV traces and a flat manifest of every resolved constant.
//!
//! A run is a grid of cells, one per (method, seed); deterministic methods
//! ignore the seed list and run once. Cells run in parallel on immutable
//! problem data and each writes its own file.

mod config;
mod experiment;
mod reference;
mod tracefile;

pub use config::{
    resolve_data_path, Budget, DataSpec, OutputSpec, ProblemSpec, ReferenceSpec, RunConfig, SolverMethod, SolverSpec,
    DATA_DIR_ENV,
};
pub use experiment::{
    iterations_for, read_reference_cache, run_experiment, run_method, stochastic_params, write_reference_cache,
    CellOutcome, CellStatus, ExperimentReport, MANIFEST_FILE,
};
pub use reference::{compute_reference, compute_reference_with, Reference, ReferenceMethod};
pub use tracefile::{
    format_real, parse_manifest, parse_trace, read_manifest, read_trace, render_trace, write_manifest, write_trace,
    TRACE_HEADER,
};
