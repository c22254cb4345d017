use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate ball: no grid node within radius {radius} of the center")]
    DegenerateBall { radius: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("compatibility error: datum has {defect:e} incompatible mass (tolerance {tolerance:e})")]
    Compatibility { defect: f64, tolerance: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("time {t} outside path range [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("truncated payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("run became unstable at t = {t}: {reason}")]
    Unstable { t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
