use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series did not reach its truncation criterion before the hard cap.
    #[error("series did not converge within {cap} terms (lambda = {lambda})")]
    Convergence { lambda: f64, cap: usize },

    #[error("single-photon coincidence probability underflowed to zero")]
    ZeroCoincidence,

    /// The security budget does not satisfy eps_bar + eps_ec + eps_pa + eps_pe <= eps.
    #[error("security budget violated: {0}")]
    Budget(String),

    #[error("parameter-estimation sample is empty ({0})")]
    PeSampleEmpty(String),

    /// No parameter choice yields a positive key.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
