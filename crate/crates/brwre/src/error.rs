//! Crate-wide error type. Variants are grouped by the domain object whose
//! contract was violated, so callers can map them onto exit codes or field
//! diagnostics without string matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Offspring distribution fails a pmf contract (range, normalization,
    /// positive mean).
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    /// Disorder family hyperparameters are malformed.
    #[error("invalid disorder spec: {0}")]
    InvalidSpec(String),

    /// Direction vector outside the closed unit l1 ball, wrong arity, or
    /// unparseable.
    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    /// Horizon incompatible with the direction's admissible time set.
    #[error("horizon {t} is not admissible for direction {direction} (period {period})")]
    InadmissibleHorizon {
        t: u32,
        direction: String,
        period: u32,
    },

    /// Exact computation requested beyond its configured size limit.
    #[error("{what} limited to {limit}, got {requested}")]
    LimitExceeded {
        what: &'static str,
        limit: u64,
        requested: u64,
    },

    /// Window too small for the requested horizon; values inside would be
    /// contaminated by the boundary.
    #[error("window radius {radius} too small for horizon {t_max}; need radius >= {required}")]
    WindowTooSmall { radius: i64, t_max: u32, required: i64 },

    /// Scalar argument outside its admissible interval.
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Estimator asked to run on too few samples or points.
    #[error("insufficient data for {what}: need {need}, got {got}")]
    InsufficientData {
        what: &'static str,
        need: usize,
        got: usize,
    },

    /// Paired samples of unequal length.
    #[error("sample length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    /// Population exceeded a hard budget where truncation would bias the
    /// statistic instead of merely stopping a trajectory.
    #[error("population cap {cap} exceeded during {what}")]
    CapExceeded { what: &'static str, cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
