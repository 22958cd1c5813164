use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frequency grid does not cover required band: {0}")]
    GridCoverage(String),

    #[error("series too short for tau = {tau} s: need {needed} samples, have {have}")]
    SeriesTooShort { tau: f64, needed: usize, have: usize },

    #[error("linear system singular or ill-conditioned at f = {freq} Hz")]
    SingularSystem { freq: f64 },

    #[error("loop divergence detected at t = {time} s (|phase| exceeded {threshold} rad)")]
    LoopDivergence { time: f64, threshold: f64 },

    #[error("delay of {delay} s unresolvable at {sample_rate} Hz (rounding error {rel_err:.1}% of delay)")]
    UnresolvableDelay {
        delay: f64,
        sample_rate: f64,
        rel_err: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
