use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A singular potential was evaluated outside its open domain.
    #[error("{what} evaluated at r = {value}, outside the domain (-1, 1)")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("scalar resolvent solve did not converge after {iterations} iterations (r = {r})")]
    Convergence { iterations: usize, r: f64 },

    #[error("sigma > 0 requires the previous state and time step")]
    MissingPrev,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Newton did not converge: {iterations} iterations, residual {residual:e}")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("Newton trial left the separation guard (bound {bound}, trial sup-norm {trial})")]
    SeparationBreach { bound: f64, trial: f64 },

    #[error("linear solver breakdown: {0}")]
    LinearBreakdown(String),

    #[error("run aborted at t = {t}: time step fell below the floor {dt_floor:e}")]
    Aborted { t: f64, dt_floor: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("potential kind mismatch: {0}")]
    KindMismatch(String),

    #[error("malformed field snapshot: {0}")]
    Format(String),

    #[error("sweep member {label}: {source}")]
    SweepMember { label: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
