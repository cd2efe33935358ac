#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordmap;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod projection;
pub mod rasterizer;
pub mod saliency;

pub use error::{Error, Result};
