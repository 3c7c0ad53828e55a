//! Support library for the `spprt` binary: config and plan file formats,
//! report writers, interim advice, and the subcommand implementations.
//! Everything here is exercised directly by the integration tests; the
//! binary itself only parses arguments and dispatches.

pub mod advice;
pub mod commands;
pub mod config;
pub mod error;
pub mod plan_file;
pub mod report;
