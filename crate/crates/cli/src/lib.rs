//! Library face of the `quadlqr` binary, so integration tests (and anything
//! else driving runs programmatically) can reuse the config loading and
//! command plumbing.

pub mod commands;
pub mod config;
pub mod report;
