use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:e} exceeds {tolerance:e}")]
    HermiticityViolation { deviation: f64, tolerance: f64 },

    #[error("degenerate spectrum: gap {gap:e} at or below tolerance {tolerance:e}")]
    DegenerateSpectrum { gap: f64, tolerance: f64 },

    #[error("level crossing between nodes {node} and {next}: off-diagonal overlap {overlap:.3} > 0.5")]
    LevelCrossing { node: usize, next: usize, overlap: f64 },

    #[error("time {t} outside model domain [{start}, {end}]")]
    TimeOutOfDomain { t: f64, start: f64, end: f64 },

    #[error("norm drift {drift:e} exceeds {limit:e}; the time grid is too coarse")]
    NormDriftExceeded { drift: f64, limit: f64 },

    #[error("gauge broken: |Re<E_n|dE_n/dt>| = {value:e} at node {node}")]
    GaugeImaginaryPartExceeded { node: usize, value: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("precondition not met: {0}")]
    PreconditionNotMet(String),

    #[error("state dimension is {0}, Bloch vectors need dimension 2")]
    DimensionNotTwo(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dual construction cross-check failed: deviation {deviation:e} exceeds {tolerance:e} at t = {t}")]
    CrossCheckFailed { deviation: f64, tolerance: f64, t: f64 },

    #[error("model file: {0}")]
    ModelFile(String),
}

impl Error {
    /// Errors caused by bad inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidGrid(_)
                | Error::InvalidState(_)
                | Error::DomainError(_)
                | Error::ModelFile(_)
                | Error::DimensionMismatch { .. }
                | Error::DimensionNotTwo(_)
                | Error::PreconditionNotMet(_)
        )
    }
}
