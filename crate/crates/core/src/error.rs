use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} outside the admissible domain of {kernel} ({requirement})")]
    Domain {
        kernel: &'static str,
        point: Vec<f64>,
        requirement: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("matrix is not positive semidefinite: most negative pivot {pivot:e} after the full jitter ladder")]
    NotPsd { pivot: f64 },
    #[error(
        "symmetric eigensolver did not converge after {iterations} iterations (eigenvalue {index})"
    )]
    NoConvergence { iterations: usize, index: usize },
    #[error("hermitian embedding spectrum is not paired: deviation {deviation:e} at pair {index}")]
    Pairing { deviation: f64, index: usize },
    #[error("{what} exceeds cap: {requested} > {cap}; coarsen the request")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },
    #[error("anchor {anchor:?} has zero variance")]
    DegenerateAnchor { anchor: Vec<f64> },
    #[error("anchor {anchor:?} is neither a grid point nor drawn with the sample")]
    AnchorUnavailable { anchor: Vec<f64> },
    #[error("empty Δ-ball of radius {radius:e} around grid point {index}")]
    EmptyBall { radius: f64, index: usize },
    #[error("dyadic cube {index} contains {count} grid points, need at least 2")]
    SparseCube { index: usize, count: usize },
    #[error("target union is empty")]
    EmptyTarget,
    #[error("at grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Format(String),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters, domains, or inputs.
    Config,
    /// Factorization, convergence, or degenerate-conditioning failures.
    Numerical,
    /// A size cap was hit.
    Resource,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotPsd { .. }
            | Error::NoConvergence { .. }
            | Error::Pairing { .. }
            | Error::DegenerateAnchor { .. } => ErrorKind::Numerical,
            Error::CapExceeded { .. } => ErrorKind::Resource,
            Error::AtGridPoint { source, .. } => source.kind(),
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Config,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
