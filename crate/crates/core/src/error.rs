use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape specification: {0}")]
    InvalidSpec(String),

    #[error("cross section has no interior grid node at h = {h}")]
    EmptyMask { h: f64 },

    #[error("ground state is not strictly positive (min value {min:e} at node {node})")]
    NonPositiveGroundState { min: f64, node: usize },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    NoConvergence { iterations: usize, worst_residual: f64 },

    #[error("found {found} negative eigenvalues without reaching a nonnegative one")]
    CapExceeded { found: usize },

    #[error("c = {c} is outside the open interval (0, gamma/3) with gamma = {gamma}")]
    InvalidC { c: f64, gamma: f64 },

    #[error("moment order sigma = {0} is below 1/2")]
    SigmaOutOfRange(f64),

    #[error("truncation half-length {l_trunc} does not exceed the perturbation support {s0}")]
    TruncationTooSmall { l_trunc: f64, s0: f64 },

    #[error("quadrature too coarse: integrand curvature changed sign {changes} times over {nodes} nodes")]
    QuadratureTooCoarse { changes: usize, nodes: usize },

    #[error("operator needs about {required} bytes, budget is {budget}")]
    MemoryBudget { required: usize, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
