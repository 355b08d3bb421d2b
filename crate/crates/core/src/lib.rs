//! Covariance-insured screening (CIS) for ultrahigh-dimensional linear
//! regression.
//!
//! The pipeline thresholds the sample correlation matrix, splits predictors
//! into disconnected blocks, and ranks each predictor by its block-wise
//! semi-partial correlation with the response. An iterative, resampled
//! variant (ICIS) adds adaptive-Lasso selection, residual re-screening and a
//! permutation-calibrated selection-frequency threshold.

pub mod bench;
pub mod cov_block;
pub mod data;
pub mod error;
pub mod export;
pub mod icis;
pub mod regression;
pub mod rng;
pub mod screening;
pub mod simgen;

pub use cov_block::{BlockPartition, ThresholdEdges};
pub use data::{ActiveSet, Dataset, SelectionResult, SelectionRule};
pub use error::{Error, Result};
pub use data::Method;
pub use screening::ScreenStats;
