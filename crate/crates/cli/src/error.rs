use std::fmt;
use std::path::Path;

/// Failure classes with their process exit codes. Usage errors (2) are
/// reported by the argument parser before any command runs.
#[derive(Debug)]
pub enum CliError {
    /// Missing or malformed input, unwritable output.
    Input(String),
    /// The computation itself failed.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<markedshapes::Error> for CliError {
    fn from(e: markedshapes::Error) -> Self {
        use markedshapes::Error as E;
        match e {
            E::Numerical(_) | E::ZeroDispersion(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
