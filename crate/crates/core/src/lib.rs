//! Feasibility analysis for short-reach multi-fiber optical links.
//!
//! The crate propagates optical power through chains of splitters/combiners
//! (`S`), wavelength multiplexers/demultiplexers (`M`) and an optional
//! amplifier, estimates bit error rates from received-signal samples, learns
//! empirical power thresholds from measurement tables, and searches design
//! spaces for links that meet the BER tolerance.

pub mod bsd;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod explorer;
pub mod optics;
pub mod signal;

pub use crate::error::{Error, Result};
