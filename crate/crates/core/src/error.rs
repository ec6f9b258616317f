use thiserror::Error;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integrator failed at t = {time} us: {reason}")]
    Integration { time: f64, reason: String },

    #[error("steady state is not unique (singular value ratio {ratio:.3e})")]
    NonUniqueSteadyState { ratio: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("correlation not decayed at grid end ({ratio:.3e} of its initial value); use a longer delay grid")]
    Truncation { ratio: f64 },

    #[error("dispersive formula is singular: {0}")]
    Singularity(String),

    #[error("fit did not converge after {iterations} iterations (residual sum of squares {rss:.6e})")]
    Fit { iterations: usize, rss: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal condition attached to a computed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warning {
    /// The detection window closes before the photon is emitted.
    PhotonOutsideWindow,
    /// A probability estimate came out negative and was clamped to zero.
    ClampedToZero,
    /// Source gain exceeds detector gain, i.e. the inferred loss is negative.
    NegativeLoss,
}

/// A value together with an optional warning about how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warned<T> {
    pub value: T,
    pub warning: Option<Warning>,
}

impl<T> Warned<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warning: None }
    }

    pub fn flagged(value: T, warning: Warning) -> Self {
        Self { value, warning: Some(warning) }
    }
}
