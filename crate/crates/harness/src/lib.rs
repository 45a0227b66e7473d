//! Experiment harness: configuration, parallel corpus runs, statistics and
//! reports for the controller in `aec-core`.

pub mod audit;
pub mod config;
pub mod experiments;
pub mod report;
pub mod runner;
pub mod stats;
pub mod sweep;
