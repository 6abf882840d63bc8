use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported number of sites {0} (expected 1 or 2)")]
    InvalidSites(usize),

    #[error("Hilbert-space dimension overflows for n_max={n_max}, n_sites={n_sites}")]
    DimensionOverflow { n_max: usize, n_sites: usize },

    #[error("site {site:?} does not exist in a {n_sites}-site space")]
    InvalidSite { site: crate::Site, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncation tail mass {tail:.3e} exceeds {limit:.0e} (raise n_max)")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("Fock level {n} exceeds n_max={n_max}")]
    FockOutOfRange { n: usize, n_max: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not hermitian (max |M - M^†| = {0:.3e})")]
    NotHermitian(f64),

    #[error("norm drift {drift:.3e} at t={time} exceeds tolerance")]
    NormDrift { drift: f64, time: f64 },

    #[error("Krylov step size collapsed to {step:.3e} at t={time}")]
    KrylovStall { step: f64, time: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("eigenpair residual {residual:.3e} at level {level} exceeds {limit:.0e}")]
    Residual { level: usize, residual: f64, limit: f64 },

    #[error("decomposition covers only {covered:.6} of the initial state (need >= {required})")]
    IncompleteDecomposition { covered: f64, required: f64 },

    #[error("time grids differ between series '{left}' and '{right}'")]
    GridMismatch { left: String, right: String },

    #[error("dimension {dim} exceeds the dense limit {limit}")]
    DenseLimit { dim: usize, limit: usize },

    #[error("checkpoint {path} does not match this sweep: {reason}")]
    CheckpointMismatch { path: PathBuf, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
