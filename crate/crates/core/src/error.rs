//! Error taxonomy for the whole crate.
//!
//! Errors are grouped by how a caller should react to them:
//!
//! * configuration and input problems (`Schema`, `Parse`, `Validation`,
//!   `Domain`) mean the request itself was malformed;
//! * data-dependent failures (`NoEffectiveSample`, `NonConvergence`,
//!   `DensityNormalization`) mean the computation was well-posed but the
//!   numbers did not cooperate;
//! * `Io`/`Csv` wrap the underlying file plumbing.
//!
//! The CLI maps the first group to exit code 1 and the second to exit code 2.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A required CSV column is missing from the header.
    #[error("missing column `{column}` in CSV header")]
    Schema { column: String },

    /// A cell failed to parse, with the 1-based data row index.
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    /// The dataset or request violates a documented contract.
    #[error("{0}")]
    Validation(String),

    /// A numeric argument is outside its mathematical domain.
    #[error("{0}")]
    Domain(String),

    /// No observation in the given arm carries positive kernel weight at the
    /// evaluation point, so the ratio estimator is undefined there.
    #[error("no effective sample in arm {arm} at {at}")]
    NoEffectiveSample { arm: u8, at: String },

    /// Iteratively reweighted least squares failed to converge; `model` names
    /// the fit (e.g. "full propensity model", "propensity model without x2").
    #[error("{model}: logistic fit did not converge (final gradient norm {gradient_norm:.3e})")]
    NonConvergence { model: String, gradient_norm: f64 },

    /// An instance is too large for exhaustive enumeration.
    #[error("enumeration refused: m = {m} exceeds the limit of {max}")]
    TooLarge { m: usize, max: usize },

    /// The requested sensitivity level is not present in the curve.
    #[error("gamma = {gamma} is not one of the curve's levels")]
    GammaAbsent { gamma: f64 },

    /// A population density failed its normalization self-check.
    #[error("density integrates to {got:.6} but should integrate to {expected:.6}")]
    DensityNormalization { expected: f64, got: f64 },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Underlying CSV reader/writer failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
