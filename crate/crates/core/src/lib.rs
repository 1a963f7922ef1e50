//! Median bias of multivariate estimators and rectangular-hull confidence
//! regions.
//!
//! * [`sign_measure`]: laws on sign patterns `{-1, 0, 1}^d`, elementary
//!   mass-dispersal operations and the couplings that realise them.
//! * [`median_bias`]: rectilinear, Tukey and orthant median biases.
//! * [`bounds`]: miscoverage bounds for the hull of `B` estimators and the
//!   batch-count rule.
//! * [`hulc`]: the sample-splitting confidence region and its variants.
//! * [`simulate`]: samplers, exact miscoverage oracles and Monte Carlo
//!   experiments.

pub mod bounds;
pub mod error;
pub mod hulc;
pub mod median_bias;
pub mod numfmt;
pub mod rng;
pub mod sign_measure;
pub mod simulate;
pub mod transport;

pub use error::{Error, Result};
