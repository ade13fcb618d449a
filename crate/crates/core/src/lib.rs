//! Numerical lab for a nonlocal predator–prey system on a shifting habitat.

pub mod dynamics;
pub mod error;
pub mod format;
pub mod habitat;
pub mod harness;
pub mod kernels;
pub mod observers;
pub mod quadrature;
pub mod config;
pub mod speeds;
pub mod subsolution;
pub mod hypotheses;

pub use error::{Error, Result};
