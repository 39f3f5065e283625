//! Command-line runner for safedoe-core: configuration files, campaign
//! suites, trace files, comparisons and reference checks.

pub mod app;
pub mod compare;
pub mod config;
pub mod oracle;
pub mod output;
pub mod suite;
