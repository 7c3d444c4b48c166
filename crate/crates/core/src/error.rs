use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no strikes")]
    NoStrikes,
    #[error("all mid prices undefined")]
    NoMids,
    #[error("no usable quotes")]
    NoUsableQuotes,
    #[error("negative variance: bracket evaluates to {0}")]
    NegativeVariance(f64),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("both expiries have {0} days to expiry")]
    EqualExpiries(u32),
    #[error("expiries of {0} and {1} days do not bracket 30 days")]
    NotBracketing(u32, u32),
    #[error("anchor {0} lies outside the strike grid")]
    AnchorOutsideGrid(f64),
    #[error("correlation matrix is not positive semidefinite")]
    NotPsd,
    #[error("non-finite state at path {path}, step {step}")]
    NonFinite { path: usize, step: usize },
    #[error("state exceeded 1e12 at path {path}, step {step}")]
    Explosion { path: usize, step: usize },
    #[error("empty simulation")]
    EmptySimulation,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("inconsistent model/convention: h = {value} at node {node} (standard error {std_error})")]
    NegativeH { node: usize, value: f64, std_error: f64 },
    #[error("solver unstable; retry with at least {suggested_steps} time steps")]
    Unstable { suggested_steps: usize },
    #[error("squared VIX must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("maturity mesh: {0}")]
    Mesh(String),
    #[error("implied VIX is not positive at path {path}, step {step}")]
    NonPositiveImpliedVix { path: usize, step: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("missing input: {0}")]
    Missing(String),
}

pub type Result<T> = core::result::Result<T, Error>;
