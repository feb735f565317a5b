//! Identification of linear recurrent networks from chaotic time series by
//! alternating minimization over hidden states and recurrent weights, under
//! either a sparse (L1 / epsilon-insensitive) or a quadratic cost.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lrnn;
pub mod optimize;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
