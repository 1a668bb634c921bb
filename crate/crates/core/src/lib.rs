//! Numerical realisation of the gluing construction of self-shrinkers built
//! from stacked planes joined by catenoidal bridges.

// `!(x > 0.0)` is used deliberately: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod checks;
pub mod config;
pub mod error;
pub mod geometry;
pub mod ld;
pub mod numeric;
pub mod rld;
pub mod specfun;

pub use error::{Error, Result};
