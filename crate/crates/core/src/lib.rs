pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod incident;
pub mod medium;
pub mod quadrature;
pub mod sources;
pub mod specfun;

pub use error::{Error, Result};
