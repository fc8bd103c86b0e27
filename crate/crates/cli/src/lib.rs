//! Batch runner, benchmark harness and synthetic dataset writer built on
//! `polyfuse-core`.

// NaN-rejecting checks are written `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod calibration;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{CliError, CliResult, ErrorKind};
