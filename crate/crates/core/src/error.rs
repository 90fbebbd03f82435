use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Symmetry(f64),

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("matrix is not positive definite (Cholesky pivot {pivot} failed)")]
    Definiteness { pivot: usize },

    #[error("matrix is rank deficient at column {column}")]
    Rank { column: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("null space of the intra-class scatter is empty (rank {rank} of {dim})")]
    NoNullSpace { rank: usize, dim: usize },

    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("average precision is undefined without positive samples")]
    UndefinedAp,

    #[error("cannot build folds: {0}")]
    Fold(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the command-line tool: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::Parse { .. }
            | Error::Input(_)
            | Error::Io(_)
            | Error::Fold(_)
            | Error::UndefinedAp
            | Error::Dimension(_)
            | Error::State(_) => 3,
            Error::Symmetry(_)
            | Error::Numeric(_)
            | Error::Definiteness { .. }
            | Error::Rank { .. }
            | Error::EmptyCluster { .. }
            | Error::NoNullSpace { .. }
            | Error::Degenerate(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
