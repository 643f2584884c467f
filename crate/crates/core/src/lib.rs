//! Semantic occupancy ground-truth generation from labeled lidar sequences,
//! radar/camera fusion preprocessing, and occupancy evaluation.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accumulate;
pub mod classes;
pub mod cloudio;
pub mod depthassoc;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod radarfeat;
pub mod synth;
pub mod voxelize;

pub use error::{Error, Result};
