//! Configuration, scenario runners and reports behind the `shrinklab` binary.

pub mod config;
pub mod report;
pub mod scenarios;
