//! Cross-correlogram estimation of impulse response components for a
//! linear system driven by white noise, with the spectral, metric-entropy
//! and tail-bound machinery needed to quantify its accuracy.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod entropy;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod montecarlo;
pub mod quadrature;
pub mod signal;
pub mod spectral;

pub use error::{Error, Result};
