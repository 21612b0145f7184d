//! Entropic central limit theorem for central order statistics.
//!
//! Exact entropies of uniform order statistics, the three-term decomposition
//! of the relative entropy between `X_(k)` and its Gaussian approximation,
//! the supporting moment and concentration bounds, and rate experiments.

// `!(x > lo)` guards are written that way so NaN is rejected too; the long
// float literals are published quadrature nodes and coefficients.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bounds;
pub mod cli;
pub mod distributions;
pub mod entropy_kl;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod order_stats;
pub mod quad;
pub mod rng;
pub mod serde_ext;
pub mod special;

pub use error::{Error, Result};
