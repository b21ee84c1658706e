//! Constraint analysis for superconducting circuit Lagrangians.

pub mod cli;
pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod matrix;
pub mod parser;
pub mod pipeline;
pub mod reduction;
pub mod report;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;
