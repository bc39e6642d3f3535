//! Simulation and verification toolkit for constant-step stochastic
//! approximation whose small-step limits are differential inclusions.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod di_solver;
pub mod error;
pub mod models;
pub mod prox;
pub mod quadrature;
pub mod rng;
pub mod setvalued;
pub mod stability;
pub mod state;

pub use error::{Error, Result};
pub use state::{StateVector, StepSize, Trajectory};
