//! Residual-based error certificates for approximate solutions of linear ODEs.
//!
//! A candidate solution (typically a small tanh network) is evaluated with
//! exact derivatives through Taylor-mode jets; its residual `Lu - f` is sampled
//! on nested partitions of the time interval, and the per-cell residual norms
//! are turned into rigorous pointwise bounds on `|u - u*|` for first-order,
//! higher-order, Jordan-form system and variable-coefficient problems.

pub mod bounds;
pub mod candidate;
pub mod catalog;
pub mod config;
pub mod error;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod residual;
pub mod train;

pub use error::{CertifyError, Result};
