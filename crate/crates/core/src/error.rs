use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site {site} is outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("optimization diverged at iteration {iteration}: fidelity is not finite")]
    Diverged { iteration: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("state has no weight in the single-excitation sector")]
    DegenerateProjection,
}

pub type Result<T> = std::result::Result<T, Error>;
