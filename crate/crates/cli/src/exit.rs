use dptune_core::Error;

pub const USAGE: u8 = 2;
pub const INFEASIBLE: u8 = 3;
pub const CONFIG: u8 = 4;
const OTHER: u8 = 1;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: USAGE, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Self { code: INFEASIBLE, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: CONFIG, error: error.into() }
    }

    pub fn other(error: anyhow::Error) -> Self {
        Self { code: OTHER, error }
    }

    /// One line: the error and its causes joined by `: `.
    pub fn message(&self) -> String {
        format!("{:#}", self.error)
    }
}

fn code_of(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::MissingOrder(_) | Error::GridMismatch | Error::InvalidGrid(_) => USAGE,
        Error::NoSolution(_) | Error::NonConvergence(_) | Error::NonMonotone(_) => INFEASIBLE,
        Error::Config(_) => CONFIG,
        Error::GridEntry { source, .. } => code_of(source),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: code_of(&e), error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::other(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::other(e.into())
    }
}

pub type CliResult = Result<(), Failure>;
