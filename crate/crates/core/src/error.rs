use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An event received zero (or nonfinite) total intensity, so its
    /// responsibilities cannot be normalized.
    #[error("degenerate model: event {event} has zero total intensity")]
    DegenerateModel { event: usize },

    #[error("triggering matrix is unstable (spectral radius {radius})")]
    Unstable { radius: f64 },

    #[error("no stable matrix after {attempts} attempts (smallest spectral radius seen {min_radius})")]
    StabilityExhausted { attempts: usize, min_radius: f64 },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
