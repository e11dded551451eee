//! Experiment orchestration: configuration, per-seed runs, aggregation,
//! report export and the command line.

pub mod cli;
mod config;
mod report;
mod run;

pub use config::{known_keys, parse_kv, ClassChoice, DatasetSpec, ExperimentConfig, TestConfig};
pub use report::{
    aggregate, export, load_report, report_json, table_csv, table_text, write_atomic, Cell,
    ReportTable, TableRow, REPORT_FILE, SCHEMA_VERSION, TABLE_CSV, TABLE_TXT, TIMINGS_FILE,
};
pub use run::{
    original_model, run_all, run_experiment, MethodRecord, MethodTiming, RunRecord, RunSeeds,
    RunTimings, Status, ORIGINAL_LABEL,
};
