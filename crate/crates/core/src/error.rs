use thiserror::Error;

/// Errors raised by mesh handling, assembly, the linear solvers and the
/// eigensolvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("parse error at byte {offset}: {message}")]
    ExprParse { offset: usize, message: String },

    #[error("mesh invariant violated: {0}")]
    InvariantViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("incompatible right-hand side: kernel component {component:e}")]
    IncompatibleRhs { component: f64 },

    #[error("incompatible source: compatibility defect {defect:e} exceeds {tolerance:e}")]
    IncompatibleSource { defect: f64, tolerance: f64 },

    #[error("degenerate constraint: kernel pair has constraint value {value:e}")]
    DegenerateConstraint { value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("eigensolver failed: {0}")]
    Backend(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MeshParse { .. } | Error::ExprParse { .. } => "parse-error",
            Error::InvariantViolation(_) => "invariant-violation",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Domain(_) => "domain-error",
            Error::SingularSystem(_) => "singular-system",
            Error::NoConvergence { .. } => "no-convergence",
            Error::IncompatibleRhs { .. } => "incompatible-rhs",
            Error::IncompatibleSource { .. } => "incompatible-source",
            Error::DegenerateConstraint { .. } => "degenerate-constraint",
            Error::NotPositiveDefinite => "not-positive-definite",
            Error::Backend(_) => "backend-failure",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io-error",
        }
    }

    /// True for failures caused by the input (as opposed to numerical breakdown).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            Error::InvalidArgument(_)
            | Error::MeshParse { .. }
            | Error::ExprParse { .. }
            | Error::InvariantViolation(_)
            | Error::DimensionMismatch { .. }
            | Error::Domain(_)
            | Error::IncompatibleSource { .. }
            | Error::DegenerateConstraint { .. }
            | Error::Io(_) => true,
            _ => false,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
