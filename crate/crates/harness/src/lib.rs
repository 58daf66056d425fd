//! Command-line harness and console backend for the driving benchmark.

pub mod cli;
pub mod config;
pub mod drivers;
pub mod eval;
pub mod report;
pub mod server;
