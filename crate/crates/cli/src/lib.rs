//! Command-line pipeline for the retrosynthesis toolkit.
//!
//! Every command reads a [`RunConfig`], writes its artifacts under
//! `data.out_dir` stamped with the config hash, and maps failures onto
//! exit codes: 0 success, 1 usage, 2 data error, 3 verification failure.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use config::{DataConfig, EvalConfig, RunConfig, SplitName};
pub use error::CliError;
