//! Streaming analysis and synthesis of narrowband power-line noise traces.

// NaN-rejecting guards are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dependence;
pub mod config;
pub mod error;
pub mod fit;
pub mod grid;
pub mod ingest;
pub mod pipeline;
pub mod plot;
pub mod special;
pub mod spectral;
pub mod stationarity;
pub mod synthesis;

pub use error::{Error, Result};
