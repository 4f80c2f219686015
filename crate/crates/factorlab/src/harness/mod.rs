//! Experiment driver: config files in, structured reports out.

pub mod config;
pub mod generators;
pub mod report;
mod run;

pub use run::{batch, run, HarnessError};
