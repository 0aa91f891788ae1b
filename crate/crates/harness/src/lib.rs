//! Experiment harness for the quadrotor multi-step prediction models:
//! configuration parsing, dataset assembly, training/evaluation orchestration,
//! and report generation shared by the `e2e-tcn` command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod reference;
pub mod report;
pub mod run;
