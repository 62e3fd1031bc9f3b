use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One problem found while reading a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigDiagnostic {
    /// 1-based line number, 0 when the problem is not tied to a line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: `{}`: {}", self.line, self.key, self.message)
        } else {
            write!(f, "`{}`: {}", self.key, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid mode: {0}")]
    Mode(String),

    #[error("no exponential bound found: {0}")]
    NoBound(String),

    #[error("Laplace transform diverges: {0}")]
    Divergence(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("phase-space content lost at the grid boundary: {0}")]
    DataLoss(String),

    #[error("extrapolation outside the tabulated range: {0}")]
    Extrapolation(String),

    #[error("singular implicit step: {0}")]
    SingularStep(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("no root found: {0}")]
    NoRoot(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration has {} problem(s):\n{}", .0.len(), join_diagnostics(.0))]
    Config(Vec<ConfigDiagnostic>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_diagnostics(d: &[ConfigDiagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            _ => 3,
        }
    }
}
