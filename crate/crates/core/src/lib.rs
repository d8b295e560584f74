//! Numerical laboratory for Dirichlet-minimizing special Q-valued functions.

pub mod acceptance;
pub mod cli;
pub mod epiperimetric;
pub mod error;
pub mod fields;
pub mod frequency;
pub mod homogeneous;
pub mod minimize;
pub mod oracle;
pub mod qspace;
pub mod whitney;

pub use error::{Error, Result};
