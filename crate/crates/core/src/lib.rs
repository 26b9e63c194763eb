//! Recovery of the conditional-independence graph of a Gaussian process on
//! `[0, 1]` at the resolution of a finite partition, from replicated curves.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod operator;
pub mod partition;
pub mod recovery;
pub mod tuning;

pub use error::{Error, Result};
