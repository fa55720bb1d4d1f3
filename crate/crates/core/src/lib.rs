//! Continuum side of the toolkit: lattice free fields on the strip, cylinder
//! and sphere, Liouville fields with insertions, quantum surfaces and their
//! chaos measures, Möbius/Haar utilities, and Loewner-chain curve samplers.
//!
//! Everything is sampled against an explicit base probability measure and
//! carries a log-weight, so the non-probability measures of the theory are
//! represented as weighted ensembles restricted to finite-mass windows.

pub mod fieldops;
pub mod gff;
pub mod girsanov;
pub mod gmc;
pub mod grid;
pub mod liouville;
pub mod measures;
pub mod mobius;
pub mod params;
pub mod radial;
pub mod rng;
pub mod sle;
pub mod surfaces;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub use params::LqgParams;

use thiserror::Error;

/// Errors shared across the continuum modules.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("degenerate weights")]
    DegenerateWeights,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("grid resolution too small: {0}")]
    GridTooSmall(String),
    #[error("weight below γ²/2")]
    WeightBelowThreshold,
    #[error("diagonal singularity")]
    DiagonalSingularity,
    #[error("coincident insertion points")]
    CoincidentPoints,
    #[error("insertion point off-grid: {0}")]
    InsertionOffGrid(String),
    #[error("empty window")]
    EmptyWindow,
    #[error("bin edges must be strictly increasing")]
    BadBinEdges,
    #[error("pushforward extrapolated {frac:.3} of target sites (limit 0.01)")]
    TooMuchExtrapolation { frac: f64 },
    #[error("unstable content estimate (oscillation {osc:.3})")]
    UnstableContent { osc: f64 },
    #[error("loewner solver failed: {0}")]
    LoewnerFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
