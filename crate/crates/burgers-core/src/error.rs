use thiserror::Error;

/// Errors produced by the spectral, noise, solver and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid with {m} interior nodes cannot represent {n} sine modes (need m >= n)")]
    GridTooCoarse { m: usize, n: usize },

    #[error("cannot project {n} modes from a grid with {m} interior nodes (need n <= m)")]
    ProjectionTooFine { n: usize, m: usize },

    #[error("duration must be non-negative, got t = {0}")]
    NegativeDuration(f64),

    #[error("heat kernel is defined for t > 0, got t = {0}")]
    NonPositiveTime(f64),

    #[error("field size mismatch: {left} vs {right} modes")]
    DimensionMismatch { left: usize, right: usize },

    #[error("solver step {solver_h} is not an integer multiple of the noise slot {path_h}")]
    StepMismatch { solver_h: f64, path_h: f64 },

    #[error("time {t} is not aligned to the slot grid with h = {h}")]
    SlotAlignment { t: f64, h: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state blew up at t = {t} ({what})")]
    BlowUp { t: f64, what: String },

    #[error(
        "fixed-point iteration diverged (residual {prev:.3e} -> {next:.3e}); shorten the horizon"
    )]
    OracleDivergence { prev: f64, next: f64 },

    #[error("horizon {m} exceeds the available window of {available} time units")]
    HorizonExceedsWindow { m: f64, available: f64 },

    #[error("tangent vector underflowed at t = {t}; decrease renorm_every")]
    TangentUnderflow { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
