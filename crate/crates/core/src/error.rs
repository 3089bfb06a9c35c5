use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tangle {tau0} is infeasible for local dimension {dim} (maximum {max})")]
    InfeasibleTangle { tau0: f64, dim: usize, max: f64 },

    #[error("sampling failed after {tries} rejected draws")]
    SamplingFailure { tries: usize },

    #[error("integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("no converged stationary point: {0}")]
    NoStationaryPoint(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
