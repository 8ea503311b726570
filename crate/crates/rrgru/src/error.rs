use std::fmt;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// config failures exit 2, data failures exit 3, numeric failures exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    Shape {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// Violated precondition of an operation (wrong argument, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed SemEval block or cache record.
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Relation string that is none of the 19 known labels.
    #[error("{path}:{line}: unknown relation label {label:?}")]
    Label {
        path: String,
        line: usize,
        label: String,
    },

    /// Bad embedding file line (wrong dimension, unparseable number).
    #[error("{path}:{line}: embedding format error: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    /// Non-finite value surfaced during training or gradient checking.
    #[error("numeric error in {name}: {msg}")]
    Numeric { name: String, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. }
            | Error::Label { .. }
            | Error::Format { .. }
            | Error::Checkpoint(_)
            | Error::Io { .. } => 3,
            Error::Numeric { .. } => 4,
            Error::Shape { .. } | Error::Contract(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
