//! Transient-growth bounds for linear ODEs, higher-order and difference
//! equations, and delay differential equations, from pseudospectra of
//! matrix-valued functions, with simulators to check them against.

pub mod ddebounds;
pub mod error;
pub mod linalg;
pub mod lowerbounds;
pub mod matfun;
pub mod odebounds;
pub mod problems;
pub mod pseudo;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};
