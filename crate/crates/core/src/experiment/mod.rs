//! Seeded experiment orchestration and machine-readable reports.
//!
//! Seeds run in parallel; every random draw derives from the master seed and
//! the seed index alone, and results are assembled in seed order, so reports
//! do not depend on the thread count.

mod config;
mod report;
mod run;

pub use config::{
    load_config, preset_modulators, preset_volatilities, presets, ExperimentConfig,
    ModulatorConfig, Thresholds, TimeChangeSpec, MAX_FBM_LEVEL, MAX_TIME_CHANGED_LEVEL,
};
pub use report::{format_float, write_report, CALCULUS_HEADER, RESIDUALS_HEADER, TERMINAL_HEADER};
pub use run::{
    dyadic_grids, run_calculus_suite, run_experiment, CalculusRow, FailureKind, LevelStats,
    ModulatorEngine, Outcome, RunKind, RunReport, SeedFailure, TerminalRecord, Verdict,
    CALCULUS_VERIFIERS, CONFIG_ERROR_EXIT_CODE,
};
