//! File formats and the `monostab` command-line tool on top of
//! `monostab-core`.

pub mod cli;
pub mod config;
pub mod report;
