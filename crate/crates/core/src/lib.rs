//! Exact accuracy analysis for privacy-constrained multi-party bit release.
//!
//! Each of `k` parties holds one private bit and publishes a randomized view
//! of its data; a decision rule then estimates a joint function of all bits
//! from the public transcript. Per-party privacy is a multiplicative bound
//! `lambda_i = exp(eps_i)` on how much any single bit may shift transcript
//! probabilities. This crate computes exact average-case and worst-case
//! accuracies, derives optimal decision rules, and certifies via linear
//! programming duality that independent bit flipping (randomized response)
//! attains the best accuracy any protocol can achieve under those bounds.
//!
//! Modules:
//!
//! - [`bits`]: bit-vector indexing conventions shared by all modules.
//! - [`function`]: function tables, accuracy measures, weight tensors.
//! - [`protocol`]: protocol matrices, randomized response, privacy and
//!   rank-1 validation.
//! - [`decision`]: decision rules, accuracy evaluation, optimal rules.
//! - [`lp`]: dense two-phase simplex solver with dual extraction.
//! - [`geometry`]: extremal signatures, half-space geometry, optimality
//!   certificates.
//! - [`analysis`]: closed-form accuracies, hypothesis-testing regions,
//!   binary mechanism tools.
//! - [`oracle`]: brute-force optima and randomized protocol sampling.
//! - [`multibit`]: two-round protocols for parties holding several bits.

pub mod analysis;
pub mod bits;
pub mod decision;
pub mod function;
pub mod geometry;
pub mod lp;
pub mod multibit;
pub mod oracle;
pub mod protocol;

pub use decision::{AccuracyReport, DecisionRule, Mode};
pub use function::{AccuracyMeasure, FunctionTable, WeightTensor};
pub use protocol::{PrivacyBudget, Protocol};

/// Crate-wide error type. The command-line front end maps variants onto its
/// exit-code taxonomy.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Inconsistent or out-of-range inputs.
    #[error("configuration: {0}")]
    Config(String),
    /// A named transcript, label, or party does not exist.
    #[error("lookup: {0}")]
    Lookup(String),
    /// Malformed serialized data.
    #[error("parse: {0}")]
    Parse(String),
    /// An operation that requires `lambda_i > 1` met a degenerate budget.
    #[error("degenerate budget: {0}")]
    Degenerate(String),
    /// Numerical failure inside the simplex solver; carries the last basis
    /// as a reproduction aid.
    #[error("solver: {message}")]
    Solver {
        message: String,
        last_basis: Vec<usize>,
    },
    /// Rejection sampling exhausted its retry budget.
    #[error("sampling: {0}")]
    Sampling(String),
    /// A documented precondition does not hold for the given arguments.
    #[error("precondition: {0}")]
    Precondition(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn lookup(msg: impl Into<String>) -> Self {
        Error::Lookup(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default absolute tolerance for validation checks.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Absolute tolerance for row-stochasticity checks.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Corner margins below this bound invalidate a dual certificate.
pub const CERTIFICATE_MARGIN_TOL: f64 = 1e-7;
