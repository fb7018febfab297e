use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("CFL violation: dt = {dt:e} exceeds admissible {admissible:e}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("particle {index} left the box at t = {time}: {position:?}")]
    Escape {
        index: usize,
        time: f64,
        position: Vec<f64>,
    },

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("stale density: field at t = {field_time}, ensemble at t = {ensemble_time}")]
    StaleDensity { field_time: f64, ensemble_time: f64 },

    #[error("degenerate datum: {0}")]
    Degenerate(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
