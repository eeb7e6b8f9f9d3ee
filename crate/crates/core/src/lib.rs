//! Finite-range two-channel model for two and three resonant identical
//! bosons: calibration, dimers, trimers and three-body recombination.

pub mod converge;
pub mod error;
pub mod kernel3b;
pub mod quadrature;
pub mod recomb;
pub mod roots;
pub mod special;
pub mod trimers;
pub mod twobody;
pub mod units;

pub use error::{Error, Result};
