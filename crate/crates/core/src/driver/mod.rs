//! The adaptation loop, its configuration and its reports.

mod config;
mod report;
mod run;
mod verify;

pub use config::{AdaptConfig, RemesherChoice, CONFIG_KEYS};
pub use report::{
    emit_reports, exp_fit, read_records_json, write_convergence_csv, write_records_json, ExpFit,
    Manifest,
};
pub use run::{run_adaptation, ConvergenceRecord, RECORD_COLUMNS};
pub use verify::{run_checks, Check};

#[cfg(test)]
mod tests;
