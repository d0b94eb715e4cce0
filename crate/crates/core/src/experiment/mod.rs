//! Experiment orchestration: TOML configs and presets, reference values,
//! solver runs, certificates, and CSV/JSON/plot output.

mod config;
mod run;

pub use config::{
    preset, ExperimentConfig, OutputConfig, Overrides, PenaltyConfig, ProblemConfig, ReferenceSettings, SolverKind,
    SubgradScheduleKind, SubgradSettings, UpperReference, PRESETS,
};
pub use run::{
    exit_code_for, load_instance, read_vector, run_experiment, write_vector, InstanceInfo, Role, RunReport, RunSummary,
    SolverRun, StageSummary, TracePoint, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_PASS, EXIT_SOLVER, SUMMARY_HEADER,
    TRACE_HEADER,
};
