//! Simulation of compound Hawkes processes through their Poisson embedding,
//! the renewal density `ψ`, Gaussian-approximation parameters, and Monte
//! Carlo diagnostics for the rate at which normalized sums approach their
//! Gaussian limits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod marks;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
