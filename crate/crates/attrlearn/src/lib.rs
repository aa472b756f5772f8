//! Experiment runner, file formats and verification suites built on
//! `attrlearn-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod config;
pub mod record;
pub mod runner;
pub mod verify;

pub use attrlearn_core as core;
