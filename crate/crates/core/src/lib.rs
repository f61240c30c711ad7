//! Identification of auto-regressive models with exogenous input (ARX) on
//! hourly traffic-volume series.
//!
//! The crate is organised bottom-up:
//!
//! * [`series`] and [`split`] hold the shared time-series and row-split types.
//! * [`ingest`] parses traffic/weather CSVs, aligns channels and generates
//!   synthetic ARX corpora.
//! * [`clustering`] implements dynamic time warping, DTW k-means with
//!   barycenter averaging and Calinski-Harabasz selection of `k`.
//! * [`features`] builds lagged regression problems, polynomial expansions and
//!   standardisation.
//! * [`linreg`] fits linear/polynomial ARX models (LARS selection followed by
//!   OLS, ridge or lasso calibration).
//! * [`neural`] holds the recurrent models (SRNN trained by Levenberg-Marquardt,
//!   LSTM trained by Adam).
//! * [`eval`] computes relative-MSE metrics for one-step and free-run
//!   prediction and assembles report rows.

// Negated comparisons are how the numeric code lets NaN through to the error
// branch; kernels index several parallel buffers with one counter.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clustering;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod linreg;
pub mod neural;
pub mod rng;
pub mod series;
pub mod split;

pub use error::{Error, Result};
pub use series::{MultiSeriesDataset, TimeSeries};
pub use split::{make_split, RowLabel, SplitAssignment, SplitSpec};
