//! Adaptive nuclear-norm trace regression solved by ADMM, with a safe
//! subspace screening rule for computing solution paths.

pub mod admm;
pub mod error;
pub mod harness;
pub mod model;
pub mod path;
pub mod prox;
pub mod screen;

pub use error::{Error, Result};
