//! Command-line companion to `zimed-core`: CSV ingestion, scenario files,
//! fit and simulation drivers, and report rendering. The `zimed` binary is a
//! thin wrapper over [`run::run`].

pub mod cli;
pub mod ingest;
pub mod report;
pub mod run;
pub mod scenario;
