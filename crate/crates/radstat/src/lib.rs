//! Command-line driver for `radstat-core`: TOML run configurations, text
//! profile and report formats, checksummed manifests, and the `solve`,
//! `verify`, `sweep` and `compare` commands.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod formats;

pub use commands::{cmd_compare, cmd_solve, cmd_sweep, cmd_verify, CliError, Exit, Options};
pub use config::{parse_config, parse_config_str, RunSpec};
