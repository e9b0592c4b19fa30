//! Convected Helmholtz equation in a rigid two-dimensional duct driven by
//! deterministic and discretized white-noise sources, truncated with a
//! perfectly matched layer.

// `!(x > 0.0)` is used on purpose so NaN inputs fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duct;
pub mod error;
pub mod greens;
pub mod harness;
pub mod noise;
pub mod pml;
pub mod quad;
pub mod solver;
pub mod source;
pub mod specfun;

pub use error::{Error, Result};
