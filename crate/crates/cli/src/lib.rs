//! Command-line workflow for pick-up motion authentication: generate
//! synthetic traces, enroll, authenticate, sweep thresholds, benchmark.

pub mod commands;
pub mod config;

pub use commands::{
    bench_tsv, cmd_auth, cmd_bench, cmd_enroll, cmd_gen, cmd_report, cmd_sweep, AuthOutcome, BenchRow, EnrollSummary,
    SweepFlags, SweepSummary,
};
pub use config::Config;
