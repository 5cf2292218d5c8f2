//! Fast-light pulse propagation, gated detection and detection-latency
//! analysis.
//!
//! The pipeline runs a spatially masked Gaussian pulse through either a
//! vacuum reference path or a gain medium with anomalous dispersion, adds
//! phase-insensitive amplifier noise, samples a gated camera with finite
//! quantum efficiency, and asks when the stripe visibility first rises above
//! its own running noise.

// `!(x > 0.0)` style checks are there to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplifier;
pub mod analysis;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod medium;
pub mod plot;
pub mod pulse;
pub mod scene;
pub mod stack_io;

pub use error::{Error, Result};

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
