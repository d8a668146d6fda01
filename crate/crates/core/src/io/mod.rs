//! Run configuration, the runner commands (`one-case`, `comparison`,
//! `post-process`) and the files they read and write.

mod commands;
mod config;

pub use commands::{
    cmd_comparison, cmd_one_case, cmd_post_process, write_trace_csv, ComparisonOutput, OneCaseOutput,
    PostProcessOutput, Verdict, MANIFEST_FILE, SUMMARY_CSV, SUMMARY_JSON, TRACE_COLUMNS,
};
pub use config::{RunConfig, SweepAxes, SCHEMA_VERSION, SEED_ENV};
