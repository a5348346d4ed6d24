use thiserror::Error;

/// Errors produced by dataset handling, learning and calibration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("statistics layout mismatch: {0}")]
    Layout(String),

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("could not place every class in both train and test after {attempts} shuffles")]
    Stratification { attempts: usize },

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

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
    pub fn at_iteration(iteration: usize, source: Error) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(source),
        }
    }

    pub fn with_context(context: impl Into<String>, source: Error) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(source),
        }
    }

    /// True for errors caused by bad user input (files, flags, configs)
    /// rather than by a failure during computation.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::UnsupportedFamily(_)
            | Error::Config(_) => true,
            Error::AtIteration { source, .. } | Error::Context { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
