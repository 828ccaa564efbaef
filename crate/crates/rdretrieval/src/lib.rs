//! Rate-distortion limits and entropy-weighted quantization for multimodal retrieval.
//!
//! Retrieval is treated as lossy source coding: a query is compressed to `R`
//! bits, the decoder ranks a fixed corpus, and quality is measured by
//! reciprocal-rank distortion `1 - 1/rank` (so mean distortion = 1 - MRR).
//!
//! The crate is organized along that pipeline:
//!
//! - [`model`] — corpora, queries, rankings, and retrieval metrics
//! - [`infotheory`] — entropy / mutual-information estimators and the
//!   modality profile (balance, imbalance, redundancy, skew)
//! - [`bounds`] — ranking Fano converse, skew penalty, frontier inversion,
//!   and finite-sample generalization bounds
//! - [`quantizer`] — entropy-weighted stochastic product quantizer with
//!   equal-probability quantile cells
//! - [`decoder`] — temperature-scaled ranking decoder (fixed, adaptive,
//!   scheduled, and BA-refined temperatures)
//! - [`synth`] — seeded Gaussian mixture benchmark with analytic entropies
//! - [`harness`] — experiment sweeps, config / matrix file formats, CSV and
//!   JSON reporting

pub mod bounds;
pub mod decoder;
pub mod harness;
pub mod infotheory;
pub mod model;
pub mod quantizer;
pub mod rng;
pub mod synth;

use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// config errors exit 2, data errors exit 3, internal invariant
/// violations exit 4.
#[derive(Debug, Error)]
pub enum RdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal invariant violation: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RdError>;
