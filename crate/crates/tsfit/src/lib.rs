//! Importance scores for observations in multivariate time series, measured
//! as the portion of a black-box model's predictive-distribution shift that a
//! subset of new observations explains. Ships with the conditional generator
//! the score needs, occlusion/gradient/surrogate baselines, synthetic
//! benchmarks with ground-truth masks, and the evaluation harness.
//!
//! Start with the runnable examples (`cargo run --example <name>`); the
//! `tsfit` binary drives the same pipeline from config files.

pub mod error;
pub mod eval;
pub mod nn;
pub mod predictor;
pub mod prob;
pub mod simdata;

pub use error::{Error, Result};
pub use prob::{GaussianParams, PredictiveDistribution, SeededRng};
pub use simdata::{TimeSeriesDataset, TimeSeriesSample};
