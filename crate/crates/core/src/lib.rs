//! Fractional heat kernels, s-parabolic Cantor sets, the gradient-kernel
//! singular integral operator on their natural measures, martingale and
//! stopping-scale analysis, and capacity estimates.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the formulas in numerical kernels
#![allow(clippy::needless_range_loop)]

pub mod cantor;
pub mod capacity;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod multiscale;
pub mod operator;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
