//! Error types shared across the library.
//!
//! Configuration problems are collected into a [`ValidationReport`] that names
//! every offending field, so callers can emit a machine-readable error report
//! instead of failing on the first bad key.

use serde::{Deserialize, Serialize};

/// One rejected configuration field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    /// Dotted path of the offending field, e.g. `links[0].rssi.tr`.
    pub field: String,
    /// Human-readable description of the constraint that failed.
    pub message: String,
}

/// All validation failures found in one configuration pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<FieldError>,
}

impl ValidationReport {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// Returns `Err(Error::Validation)` if any field was rejected.
    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} invalid field(s):", self.errors.len())?;
        for e in &self.errors {
            write!(f, " [{}: {}]", e.field, e.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown rate {0} Mbps: not present in the rate table")]
    UnknownRate(f64),

    #[error("no table rate at or above the offered load of {0} Mbps")]
    NoRateForLoad(f64),

    #[error("invalid rate table: {0}")]
    InvalidTable(String),

    #[error("invalid dwell profile: {0}")]
    InvalidDwell(String),

    #[error("invalid analytic input: {0}")]
    InvalidInput(String),

    #[error("unknown jammer preset '{0}' (expected balanced, rare, frequent, or balanced-validation)")]
    UnknownPreset(String),

    #[error("unknown link id '{0}'")]
    UnknownLink(String),

    #[error("configuration rejected: {0}")]
    Validation(ValidationReport),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
