//! Config-driven experiment harness: parse and validate a TOML experiment
//! file, fan replications out over a worker pool, and emit deterministic CSV
//! plus a JSON summary per subcommand.

mod config;
mod records;
mod runs;

pub use config::{
    ExperimentConfig, ExperimentSection, FamilySection, OptimizerSection, PriorSection,
    ProblemSection, Resolved, ScalarOrVec,
};
pub use records::{write_csv, RunRecord, CSV_HEADER};
pub use runs::{
    cmd_consistency, cmd_coverage, cmd_normality, cmd_optimal_value, cmd_risk_eval, cmd_solve,
    RunOutput,
};
