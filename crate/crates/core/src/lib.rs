//! Human-centred out-of-distribution analysis of classification behaviour.
//!
//! The crate scores distortion conditions by how far human accuracy moves
//! away from an undistorted baseline, groups conditions into perceptual
//! regimes with a one-dimensional Gaussian mixture, and measures error
//! alignment between classification systems (humans or models).

pub mod analysis;
pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod ingest;
pub mod spectrum;
pub mod stats;
pub mod synth;
