use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("nonzero detuning {detuning} is not supported by the resonant model")]
    NonzeroDetuning { detuning: f64 },

    #[error("ion index {index} out of range for {ion_count} ion(s)")]
    IonIndex { index: usize, ion_count: usize },

    #[error("displacement block did not converge by pad = {pad} (last change {change:e})")]
    PadNotConverged { pad: usize, change: f64 },

    #[error("time stepping did not converge: halving dt changed the state by {change:e}")]
    StepConvergence { change: f64 },

    #[error("coupling for {what} vanishes; cannot rotate through it")]
    VanishingCoupling { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
