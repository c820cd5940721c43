use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The state matrix has spectral radius >= 1.
    #[error("system is not stable (spectral radius {0})")]
    Unstable(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("resolvent (e^(i w) I - A) is singular at w = {0}")]
    SingularResolvent(f64),

    #[error("shaping filter must be square, got {outputs} outputs and {inputs} inputs")]
    NotSquare { outputs: usize, inputs: usize },

    /// `q` is at or above the H-infinity boundary `||F||_inf^-2`.
    #[error("no stabilizing Riccati solution at q = {q}")]
    NoStabilizingSolution { q: f64 },

    #[error("Riccati doubling did not converge within {0} steps")]
    MaxIterationsExceeded(usize),

    #[error("bracketing failed: {0}")]
    BracketFailure(String),

    #[error("tolerance {tol} not reached after {evaluations} evaluations")]
    ToleranceNotReached { tol: f64, evaluations: usize },

    #[error("spectral quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("model file: {0}")]
    Schema(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
