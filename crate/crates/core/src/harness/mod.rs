//! Experiment configuration, phase orchestration, sweeps and reports.

mod config;
mod pipeline;
mod report;
mod run;
mod sweep;

pub use config::{
    DataConfig, Experiment, ExperimentConfig, HiddenActivation, LatentKind, Method, OracleConfig,
    PhaseConfig, ScheduleKind,
};
pub use pipeline::{
    evaluate_target, evaluate_toy, fit_method, generate, Benchmark, ReconTarget, SeedMetrics,
    TaskAModels,
};
pub use report::{
    collect_runs, find_run_dirs, mean_std, report, AggregateRow, Comparison, Gate, ReportOutcome,
    ResultsTable, RunRecord, REPORT_COLUMNS,
};
pub use run::{
    default_run_root, read_seed_metrics, run_experiment, run_seed, write_seed_metrics,
    ExperimentOutcome, Phase, PhaseStatus, PredictionMaps, RunLayout, RunManifest, SeedOutcome,
    MANIFEST_KIND, RUN_ROOT_ENV,
};
pub use sweep::{sweep, SweepAxis, SweepCell, SweepOutcome, SWEEP_COLUMNS};
