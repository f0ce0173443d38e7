pub mod error;
pub mod lattice;
pub mod peptide;

pub use error::{Error, Result};
pub mod cost;
pub mod qsim;
pub mod optimize;
pub mod metrics;
pub mod harness;
