//! Audio-driven talking-head radiance fields at desk scale, CPU only.
//!
//! Two triplane-hash radiance branches (mouth, face) are conditioned on
//! scalar audio/blink signals through a softmax attention module, fused
//! per sample inside one volume renderer, and trained coarse-to-fine
//! against a synthetic analytic scene whose oracle renderer supplies
//! ground truth.

pub mod config;
pub mod diffcore;
pub mod encoders;
pub mod error;
pub mod field;
pub mod geom;
pub mod metrics;
pub mod real;
pub mod renderer;
pub mod synth;
pub mod trainer;
pub mod verify;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use field::FieldModel;
pub use real::Real;
