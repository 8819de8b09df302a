use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Dark-state singularity or a degenerate ratio (zero denominator).
    #[error("singular point: {0}")]
    Singular(String),

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Numerical,
    Singular,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Singular => 4,
            ErrorClass::Io => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Numerical => "numerical",
            ErrorClass::Singular => "singular",
            ErrorClass::Io => "io",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Shape(_) | Error::InvalidArgument(_) | Error::Config(_) => ErrorClass::Usage,
            Error::Invariant(_) | Error::EmptyEnsemble(_) => ErrorClass::Numerical,
            Error::Singular(_) => ErrorClass::Singular,
            Error::Io(_) => ErrorClass::Io,
        }
    }
}
