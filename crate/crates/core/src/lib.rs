//! Gibbs measures that concentrate on the zero set of a smooth map, their
//! small-temperature limits, and Langevin samplers that target them.

pub mod catalog;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod jets;
pub mod limits;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
