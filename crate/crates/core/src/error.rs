use thiserror::Error;

pub type Result<T> = std::result::Result<T, SmtlError>;

#[derive(Debug, Error)]
pub enum SmtlError {
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPsd { min_eig: f64, max_eig: f64 },
    #[error("matrix is singular, cannot raise to a negative power")]
    SingularMatrix,
    #[error("bad exponent {0}: Schatten norms need p >= 1")]
    BadExponent(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structure matrix is singular (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    SingularA { min_eig: f64, max_eig: f64 },
    #[error("bad kernel parameter: {0}")]
    BadKernelParam(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("task {0} has no observations")]
    EmptyTask(usize),
    #[error("inconsistent dimension at line {line}: expected {expected} fields, found {found}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not strictly positive definite (min eigenvalue {0:e})")]
    NotStrictlyPd(f64),
    #[error("bad penalty parameter: {0}")]
    BadPenaltyParam(String),
    #[error("bad rank {r} for dimension {dim}")]
    BadRank { r: f64, dim: usize },
    #[error("operation not supported for penalty {0}")]
    UnsupportedPenalty(String),
    #[error("graph adjacency matrix is not symmetric and nonnegative")]
    AsymmetricAdjacency,
    #[error("matrix is not positive definite: {0}")]
    NotPd(String),
    #[error("pair is infeasible: Ran(C'KC) is not contained in Ran(A)")]
    InfeasiblePair,
    #[error("conjugate gradient stalled at relative residual {0:e}")]
    CgStall(f64),
    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),
    #[error("task {0} has zero output variance")]
    ZeroVariance(usize),
    #[error("label {label} at row {row} is outside 0..{tasks}")]
    BadLabel {
        row: usize,
        label: i64,
        tasks: usize,
    },
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("nMSE values must be positive (got {0})")]
    NonPositiveNmse(f64),
    #[error("unsupported model file version: {0}")]
    VersionMismatch(String),
    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classes used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl SmtlError {
    pub fn class(&self) -> ErrorClass {
        use SmtlError::*;
        match self {
            Config { .. }
            | Invalid(_)
            | BadExponent(_)
            | BadKernelParam(_)
            | BadPenaltyParam(_)
            | BadRank { .. }
            | UnsupportedPenalty(_)
            | AsymmetricAdjacency => ErrorClass::Usage,
            Parse { .. }
            | EmptyTask(_)
            | InconsistentDimension { .. }
            | DimensionMismatch(_)
            | ZeroVariance(_)
            | BadLabel { .. }
            | LengthMismatch(..)
            | NonPositiveNmse(_)
            | VersionMismatch(_)
            | Io(_) => ErrorClass::Data,
            NonFinite
            | NotPsd { .. }
            | SingularMatrix
            | SingularA { .. }
            | NotStrictlyPd(_)
            | NotPd(_)
            | InfeasiblePair
            | CgStall(_)
            | NonFiniteObjective(_) => ErrorClass::Numerical,
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        SmtlError::DimensionMismatch(msg.into())
    }
}
