//! Library side of the command-line harness: configuration parsing,
//! experiment dispatch and run reports.

pub mod config;
pub mod experiments;
pub mod report;
