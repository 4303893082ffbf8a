// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-point detection in the mean of univariate and multivariate
//! time series by paired adaptive regression splines fitted to CUSUM curves,
//! with block-permutation bootstrap significance tests, CUSUM baselines, a
//! synthetic scenario generator and evaluation metrics.

pub mod cli;
pub mod cusum;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod infer;
pub mod linalg;
pub mod metrics;
pub mod parcs;
pub mod rng;
pub mod series;
pub mod synth;

pub use error::{ParcsError, Result};
