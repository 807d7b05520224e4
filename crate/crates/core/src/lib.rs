//! Nodal pressure reconstruction for water distribution networks with
//! Chebyshev spectral graph convolutions.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebnet;
pub mod error;
pub mod eval;
pub mod harness;
pub mod hydraulics;
pub mod network;
pub mod observe;
pub mod scenegen;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
