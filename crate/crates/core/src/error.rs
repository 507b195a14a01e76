use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested wave speed lies at or below the existence threshold.
    #[error("no periodic {family} wave for c = {c}: admissible interval is c > {threshold} (L = {length})")]
    NoPeriodicWave {
        family: &'static str,
        c: f64,
        threshold: f64,
        length: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("ambiguous kernel detection: eigenvalue {value:e} lies between zero_tol = {zero_tol:e} and 10*zero_tol")]
    AmbiguousKernel { value: f64, zero_tol: f64 },

    #[error("numerical blow-up at t = {time}")]
    BlowUp { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
