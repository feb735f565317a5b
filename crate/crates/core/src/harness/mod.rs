//! Experiment orchestration: config files, the restart matrix, reports,
//! plots and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod plots;
pub mod report;

pub use cli::cli_main;
pub use config::ExperimentConfig;
pub use experiment::{
    cell_seed, iterations_to_within, problem_series, run_cell, run_experiments, Aggregate, CellMetrics, CellRecord,
    ExperimentReport, ProblemTarget, Summary,
};
pub use plots::emit_plots;
pub use report::{emit_report, read_csv_records, read_json_report, ReportFormat};
