//! Experiment runner for the `nvcache` simulator: config files, run CSVs,
//! operation traces and cross-run comparison. The `nvsim` binary is a thin
//! command-line layer over this crate.

pub mod config;
pub mod output;
pub mod runner;
pub mod trace;

pub use config::RunOptions;
