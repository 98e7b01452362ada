use std::fmt;

use dirguide::eval::EvalError;
use dirguide::genset::GenError;
use dirguide::ingest::IngestError;
use dirguide::oracle::OracleError;
use dirguide::perturb::PerturbError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Unreachable(String),
    Write(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Unreachable(_) => 2,
            CliError::Write(_) => 3,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn write(msg: impl fmt::Display) -> Self {
        CliError::Write(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Unreachable(m) => write!(f, "oracle unreachable: {m}"),
            CliError::Write(m) => write!(f, "write failure: {m}"),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Transport { .. } => CliError::Unreachable(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Write { .. } => CliError::Write(e.to_string()),
            GenError::OracleUnreachable(_) => CliError::Unreachable(e.to_string()),
            GenError::Oracle(inner) => inner.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Write { .. } => CliError::Write(e.to_string()),
            EvalError::OracleUnreachable { .. } => CliError::Unreachable(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        match e {
            PerturbError::Write { .. } => CliError::Write(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
