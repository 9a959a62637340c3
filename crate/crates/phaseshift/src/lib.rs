//! Command-line driver for `phaseshift-core`: configuration documents, CSV and
//! JSON formats, and a thread pool for the local searches.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod io;
pub mod runner;

pub use config::{Mode, Preset, RunConfig};
pub use runner::PoolRunner;
