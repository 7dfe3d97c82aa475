use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("targets look unreachable: |beta| grew to {norm:e} (residual {residual:e})")]
    Range { norm: f64, residual: f64 },

    #[error("y = 0: swap the roles of levels 1 and 2 before choosing m")]
    RoleSwap,

    #[error("bath rejected: {0}")]
    BathRejected(String),

    #[error("ratio x/y = {u}/{v} is excluded: smallest reachable gap |y/v| = {step:e} exceeds tolerance {tol:e}")]
    ExcludedRatio { u: i64, v: i64, step: f64, tol: f64 },

    #[error("no (dn1, dn2) with |dn| <= {window} reaches the target within {tol:e}")]
    WindowExhausted { window: i64, tol: f64 },

    #[error("step size: {0}")]
    StepSize(String),

    #[error("target state is not full rank (smallest eigenvalue {0:e})")]
    NotFullRank(f64),

    #[error("reference state coincides with the thermal state; rate undefined")]
    DegenerateReference,

    #[error("unreachable under resource limits: {0}")]
    Resource(String),

    #[error("charge gap {gap} is not a multiple of ladder spacing {spacing}")]
    Commensurability { gap: f64, spacing: f64 },

    #[error("weight support is within {guard} sites of the ladder edge")]
    GuardBand { guard: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("property check failed: {0}")]
    Property(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
