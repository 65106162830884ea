//! JSON records emitted by every estimator run through the CLI.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercase hex SHA-256 of the raw config bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One experiment record: what ran, under which config and seed, the
/// per-run outcomes, aggregates and any theoretical bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: Value,
    pub config_hash: String,
    pub seed_base: u64,
    pub runs: Value,
    pub aggregate: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub bounds: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

impl Report {
    pub fn new(
        experiment: impl Into<String>,
        config: Value,
        config_hash: String,
        seed_base: u64,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            config_hash,
            seed_base,
            runs: Value::Array(Vec::new()),
            aggregate: Value::Null,
            bounds: Value::Null,
            notes: Vec::new(),
        }
    }

    pub fn runs<T: Serialize>(mut self, runs: &T) -> Result<Self> {
        self.runs = to_value(runs)?;
        Ok(self)
    }

    pub fn aggregate<T: Serialize>(mut self, aggregate: &T) -> Result<Self> {
        self.aggregate = to_value(aggregate)?;
        Ok(self)
    }

    pub fn bounds<T: Serialize>(mut self, bounds: &T) -> Result<Self> {
        self.bounds = to_value(bounds)?;
        Ok(self)
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Pretty JSON with a trailing newline. Non-finite numbers serialize as
    /// `null`.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }
}
