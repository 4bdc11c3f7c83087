// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the engine.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Coarse failure class, used by the service for status codes and by the
/// command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    /// Bad input data, failed response validation, unknown names.
    Validation,
    /// Network or remote-service failure.
    Transport,
    /// The numerics ran but did not produce a usable result.
    Numeric,
    /// Local filesystem failure.
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dictionary atom {index} is an all-zero column")]
    DegenerateAtom { index: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("all rows are identical, no principal direction exists")]
    RankDeficient,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("latent space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("duplicate concept name {0:?}")]
    DuplicateName(String),

    #[error("concept {0:?} has a zero vector")]
    ZeroAtom(String),

    #[error("unknown concept {0:?}")]
    UnknownConcept(String),

    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid edit request: {0}")]
    InvalidEdit(String),

    #[error("solver did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("response validation failed after {attempts} attempt(s): {reason}")]
    ValidationFailed { attempts: usize, reason: String },

    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("embedding dimension drift: expected {expected}, got {actual}")]
    DimensionDrift { expected: usize, actual: usize },

    #[error("no recorded exchange for request {0}")]
    ReplayMiss(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("payload truncated: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("{extra} unexpected trailing bytes after payload")]
    TrailingData { extra: u64 },

    #[error("matrix of {rows}x{cols} exceeds the {cap}-element guard")]
    OversizeGuard { rows: u64, cols: u64, cap: u64 },

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("content hash mismatch: manifest says {expected}, data hashes to {actual}")]
    HashMismatch { expected: String, actual: String },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            NotConverged { .. } => ErrorCategory::Numeric,
            Transport(_) | MissingApiKey(_) | ReplayMiss(_) => ErrorCategory::Transport,
            Io { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }

    /// Stable variant name, used as the machine-readable error code on the wire.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            DimensionMismatch { .. } => "DimensionMismatch",
            DegenerateAtom { .. } => "DegenerateAtom",
            NonFinite { .. } => "NonFinite",
            RankDeficient => "RankDeficient",
            EmptyInput(_) => "EmptyInput",
            InvalidConfig(_) => "InvalidConfig",
            SpaceMismatch(_) => "SpaceMismatch",
            DuplicateName(_) => "DuplicateName",
            ZeroAtom(_) => "ZeroAtom",
            UnknownConcept(_) => "UnknownConcept",
            KOutOfRange { .. } => "KOutOfRange",
            InvalidEdit(_) => "InvalidEdit",
            NotConverged { .. } => "NotConverged",
            Precondition(_) => "Precondition",
            MalformedResponse(_) => "MalformedResponse",
            ValidationFailed { .. } => "ValidationFailed",
            MissingApiKey(_) => "MissingApiKey",
            Transport(_) => "TransportError",
            DimensionDrift { .. } => "DimensionDrift",
            ReplayMiss(_) => "ReplayMiss",
            Io { .. } => "IoError",
            BadMagic(_) => "BadMagic",
            UnsupportedVersion(_) => "UnsupportedVersion",
            UnsupportedDtype(_) => "UnsupportedDtype",
            TruncatedPayload { .. } => "TruncatedPayload",
            TrailingData { .. } => "TrailingData",
            OversizeGuard { .. } => "OversizeGuard",
            SchemaViolation(_) => "SchemaViolation",
            HashMismatch { .. } => "HashMismatch",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
