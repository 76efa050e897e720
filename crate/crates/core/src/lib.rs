//! Operational time-of-arrival measurement in quantum phase space for a
//! Gaussian particle probed by a Gaussian filter.
//!
//! Units are ħ = m = 1 throughout.

pub mod arrival_time;
pub mod cli;
pub mod error;
pub mod grid;
pub mod momentum;
pub mod propensity;
pub mod quadrature;
pub mod spectra;
pub mod states;
pub mod uncertainty;
pub mod validation;

pub use error::{Error, Result};
