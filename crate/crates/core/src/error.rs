use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("s = {value} is outside the admissible range {range}")]
    SOutOfRange { value: f64, range: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel gradient is singular at the space-time origin")]
    Singularity,

    #[error("quadrature failed to reach tolerance {tol:e} (estimated error {err:e}): {context}")]
    Quadrature { context: String, tol: f64, err: f64 },

    #[error("power iteration did not converge in {iterations} iterations (best estimate {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::SOutOfRange { value: s, range: "(0, 1]" })
    }
}

pub(crate) fn check_s_capacity(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.5 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::SOutOfRange { value: s, range: "(1/2, 1]" })
    }
}
