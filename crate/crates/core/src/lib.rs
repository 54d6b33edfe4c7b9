//! Optimal noncoherent ASK constellations for RIS-assisted links with an
//! energy detector.
//!
//! The crate computes the composite channel statistics ([`channel`]), the
//! large-deviations rate functions of the detector statistic ([`rate`]),
//! designs constellations that equalize the boundary error exponents under
//! an average-energy budget ([`designer`]), and validates them by Monte
//! Carlo simulation ([`simulator`]).

pub mod channel;
pub mod cli;
pub mod constellation;
pub mod detector;
pub mod designer;
pub mod error;
pub mod format;
pub mod rate;
pub mod roots;
pub mod simulator;

pub use error::{Error, Result};
