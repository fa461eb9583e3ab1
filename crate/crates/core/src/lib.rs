pub mod bounds_engine;
pub mod error;
pub mod exact_cdf;
pub mod geometry;
pub mod model;
pub mod pdf_bounds;
pub mod regions;
pub mod relu_bounding;

pub use error::{Error, Result};
