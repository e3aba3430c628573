//! Random covering sets on the d-torus: length sequences, finite-stage
//! covering simulation, Cantor-type targets, dimension estimators and a
//! verification harness for the quantitative hitting statements.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covering;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lengths;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod targets;
pub mod torus;

pub use error::{Error, Result};
