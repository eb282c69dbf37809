//! Deterministic augmentation, preprocessing, splitting, sampling and
//! evaluation for mitotic-figure patch classification.

pub mod error;
pub mod image;

pub use error::{Error, Result};
pub mod geometric;
pub mod photometric;
pub mod degradation;
pub mod pipeline;
pub mod batch;
pub mod dataset;
pub mod evaluation;
