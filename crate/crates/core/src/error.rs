use std::io;

use thiserror::Error;

use crate::workerproto::ProtocolError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("config key `{key}`: {msg}")]
    ConfigValue { key: String, msg: String },

    #[error("missing required config key `{0}`")]
    ConfigMissing(&'static str),

    #[error("unknown config key `{0}`")]
    ConfigUnknown(String),

    #[error("{source_name} line {line}: {msg}")]
    Csv {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate client id `{0}`")]
    DuplicateClient(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),

    #[error("dispatch failed: {0}")]
    Dispatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn value(key: &str, msg: impl Into<String>) -> Self {
        Error::ConfigValue {
            key: key.to_owned(),
            msg: msg.into(),
        }
    }

    pub(crate) fn csv(source_name: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Csv {
            source_name: source_name.to_owned(),
            line,
            msg: msg.into(),
        }
    }
}
