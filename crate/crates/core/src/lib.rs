//! Isolated sign recognition benchmark core.
//!
//! Landmark sequences (63 features per frame: 21 hand landmarks with x, y, z)
//! flow through [`datapipe`] into one of the two classifiers in [`models`],
//! are trained by [`training`] and scored by [`evaluation`] under
//! signer-independent cross-validation. [`numerics`] holds the tensor kernels
//! and the finite-difference gradient harness everything else is tested with.

pub mod datapipe;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Real, Rng, Tensor};

/// Landmarks tracked per frame.
pub const LANDMARKS: usize = 21;
/// Coordinates per landmark.
pub const COORDS: usize = 3;
/// Features per frame.
pub const FEATURE_DIM: usize = LANDMARKS * COORDS;
/// Frames per standardized sequence.
pub const STANDARD_FRAMES: usize = 64;
