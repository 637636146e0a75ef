//! Numerical detection of polynomial first integrals of geodesic flows.

pub mod error;
pub mod geodesic;
pub mod integrals;
pub mod kernel;
pub mod metric;
pub mod obstruction;
mod ode;
pub mod oracles;
pub mod runner;
pub mod sym_poly;

pub use error::{Error, Result};
