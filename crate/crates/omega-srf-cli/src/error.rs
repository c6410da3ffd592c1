use std::fmt;

use omega_srf::SrfError;

/// Why a numerical run stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbortKind {
    PositivityLoss,
    Cfl,
    NonFinite,
    Other,
}

impl AbortKind {
    pub fn of(e: &SrfError) -> AbortKind {
        match e {
            SrfError::PositivityLoss { .. } | SrfError::NotPositive { .. } => AbortKind::PositivityLoss,
            SrfError::Cfl { .. } => AbortKind::Cfl,
            SrfError::NonFinite(_) => AbortKind::NonFinite,
            _ => AbortKind::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AbortKind::PositivityLoss => "positivity_loss",
            AbortKind::Cfl => "cfl",
            AbortKind::NonFinite => "non_finite",
            AbortKind::Other => "numerical",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(AbortKind, String),
    Acceptance(String),
    Io(String),
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> CliError {
        CliError::Config(e.to_string())
    }

    /// Exit status: 2 config, 3 numerical abort, 4 acceptance failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(..) => 3,
            CliError::Acceptance(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(k, m) => write!(f, "numerical abort ({}): {m}", k.as_str()),
            CliError::Acceptance(m) => write!(f, "acceptance failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<SrfError> for CliError {
    fn from(e: SrfError) -> CliError {
        match e {
            SrfError::Param(m) => CliError::Config(m),
            SrfError::Io(e) => CliError::Io(e.to_string()),
            SrfError::Json(e) => CliError::Io(e.to_string()),
            SrfError::Csv(e) => CliError::Io(e.to_string()),
            e => CliError::Numerical(AbortKind::of(&e), e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::Io(e.to_string())
    }
}
