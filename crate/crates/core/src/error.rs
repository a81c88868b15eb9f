use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("modulus {q} is not an odd prime")]
    NotPrime { q: u64 },

    #[error("modulus {q} exceeds the supported bit-vector size (q < 2^32)")]
    ModulusTooLarge { q: u64 },

    #[error("element {value} is outside [0, {q})")]
    ElementOutOfRange { value: u64, q: u64 },

    #[error("duplicate element {value}")]
    DuplicateElement { value: u64 },

    #[error("{a} has no inverse modulo {q}")]
    NoInverse { a: i64, q: u64 },

    #[error("invalid affine map: scale {scale} is zero modulo {q}")]
    InvalidMap { scale: i64, q: u64 },

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },

    #[error("cardinality {m} exceeds modulus {q}")]
    Cardinality { m: u64, q: u64 },

    #[error("out of range: {0}")]
    Range(String),

    #[error("budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("incremental count drifted: running {running}, recount {recount}")]
    DeltaMismatch { running: u64, recount: u64 },

    #[error("set file: {field} (line {line}, column {column}): {message}")]
    SetFile {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o: {0}")]
    Io(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True when the error is a resource/budget guard rather than bad input.
    pub fn is_budget(&self) -> bool {
        match self {
            Error::Budget { .. } => true,
            Error::Stage { source, .. } => source.is_budget(),
            _ => false,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
