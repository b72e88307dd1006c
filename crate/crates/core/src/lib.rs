//! Instance-boundary-aware superpoints, 2D-to-3D lifting and view-wise
//! instance partition for open-vocabulary 3D segmentation.

pub mod error;
pub mod geometry;
pub mod lifting;
pub mod model;
pub mod superpoint;
pub mod synth;
pub mod vip;

pub use error::{Error, Result};
