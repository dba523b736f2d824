//! Residual-augmented conditional flow matching for probabilistic PDE surrogates.

pub mod cli;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod neural;
pub mod pde;
pub mod random_fields;
pub mod rng;
pub mod train;

pub use error::{FloralError, Result};
