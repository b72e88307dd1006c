use std::path::PathBuf;

use ovseg3r_core::model::codec::CodecError;
use serde_json::json;
use thiserror::Error;

/// Validation failures: bad flags, configs or input files.
pub const EXIT_VALIDATION: i32 = 2;
/// Internal invariant violations, including oracle mismatches.
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: ovseg3r_core::Error },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] ovseg3r_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invariant(String),

    #[error("stage {stage} failed: {source}")]
    Stage { stage: &'static str, source: Box<CliError> },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn core(&self) -> Option<&ovseg3r_core::Error> {
        match self {
            CliError::Read { source, .. } | CliError::Core(source) => Some(source),
            CliError::Stage { source, .. } => source.core(),
            _ => None,
        }
    }

    fn codec(&self) -> Option<&CodecError> {
        match self.core() {
            Some(ovseg3r_core::Error::Codec(c)) => Some(c),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Stage { source, .. } => source.exit_code(),
            _ => match self.core() {
                Some(ovseg3r_core::Error::Invariant(_)) => EXIT_INVARIANT,
                _ => EXIT_VALIDATION,
            },
        }
    }

    pub fn class(&self) -> &'static str {
        if let Some(c) = self.codec() {
            return c.class();
        }
        match self {
            CliError::Stage { source, .. } => source.class(),
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Invariant(_) => "invariant",
            _ => match self.core() {
                Some(ovseg3r_core::Error::Io(_)) => "io",
                Some(ovseg3r_core::Error::Invariant(_)) => "invariant",
                _ => "invalid_input",
            },
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "class": self.class(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
                "stage": self.stage(),
                "offset": self.codec().map(|c| c.offset()),
            }
        })
    }
}

pub type CliResult<T> = Result<T, CliError>;
