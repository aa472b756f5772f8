//! Attribute-efficient active learning of sparse homogeneous halfspaces
//! under malicious noise.
//!
//! The crate is `no_std` (with `alloc`). It contains the geometry and
//! sampling primitives, the malicious-noise oracle simulation, soft outlier
//! removal through a relaxed sparse-PCA certificate, constrained hinge-loss
//! minimization, and the phase-based learner that ties them together.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Failed runs hand back their partial report by value.
#![allow(clippy::result_large_err)]

extern crate alloc;

pub mod distributions;
pub mod erm;
pub mod error;
pub mod geometry;
pub mod learner;
pub mod oracle;
pub mod outlier;

pub use error::{Error, Result};
