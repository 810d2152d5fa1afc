//! Experiment driver: configurations, seeded campaigns, table presets, reports and diagnostics.

pub mod config;
pub mod diagnose;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Problem, Target};
pub use diagnose::{diagnose, DiagnoseInputs, Diagnostic};
pub use presets::table_preset;
pub use report::{emit_report, Format};
pub use run::{run_many, run_once, AggregateReport, RunRecord, Termination};
