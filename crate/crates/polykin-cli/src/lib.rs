//! IO, file formats, experiment drivers, and report emission for the
//! polyatomic BGK toolkit. The `polykin` binary is a thin wrapper around
//! [`drivers`].

pub mod config;
pub mod drivers;
pub mod report;
pub mod snapshot;

use std::fmt;

use polykin_core::KineticError;

/// Stable process exit codes:
/// 0 ok, 2 vacuum, 3 parse/IO, 4 theorem violation, 5 numerical failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VACUUM: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_THEOREM: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Io(std::io::Error),
    Json(serde_json::Error),
    Malformed(String),
    Kinetic(KineticError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Json(_) | CliError::Malformed(_) => EXIT_PARSE,
            CliError::Kinetic(KineticError::VacuumState { .. }) => EXIT_VACUUM,
            CliError::Kinetic(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Json(e) => write!(f, "json error: {e}"),
            CliError::Malformed(msg) => write!(f, "malformed input: {msg}"),
            CliError::Kinetic(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl From<KineticError> for CliError {
    fn from(e: KineticError) -> Self {
        CliError::Kinetic(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
