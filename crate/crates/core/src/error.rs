use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("incompatible multiplicity: expected q = {expected}, found q = {found}")]
    Multiplicity { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("ball of radius {radius} around ({cx}, {cy}) leaves the sampled domain")]
    BallOutsideDomain { cx: f64, cy: f64, radius: f64 },

    #[error("invalid boundary trace: {0}")]
    InvalidTrace(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("singular set has {0} disjoint clusters, at most one is allowed")]
    MultipleClusters(usize),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
