//! Command-line harness for the isolab experiments: configuration,
//! artifact output and plot scripts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
