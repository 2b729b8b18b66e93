//! Iterative regularization by early stopping for linear inverse problems
//! with strongly convex penalties.

pub mod error;
pub mod experiments;
pub mod io;
pub mod linops;
pub mod problems;
pub mod regularizers;
pub mod solvers;
pub mod stopping;
pub mod tikhonov;

pub use error::{Error, Result};
