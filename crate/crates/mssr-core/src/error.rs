use thiserror::Error;

/// Errors raised anywhere between parsing a network file and emitting an
/// analysis report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("scaling analysis failed: {0}")]
    Scaling(String),

    #[error("no limit for reaction {reaction}: {message}")]
    NoLimit { reaction: String, message: String },

    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),

    #[error("state enumeration failed: {0}")]
    Enumeration(String),

    #[error("master equation solve failed: {0}")]
    Solve(String),

    #[error("analysis failed: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
