use std::path::PathBuf;

use thiserror::Error;

/// A config that failed to parse or validate. Maps to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    field: String,
    message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }

    pub fn missing(field: &str) -> Self {
        Self::new(field, "is required")
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    /// Recovers the offending field from a serde message where possible.
    pub fn from_json(err: serde_json::Error) -> Self {
        let text = err.to_string();
        let quoted = |marker: &str| {
            text.find(marker).and_then(|i| {
                let rest = &text[i + marker.len()..];
                rest.find('`').map(|j| rest[..j].to_string())
            })
        };
        let field = quoted("missing field `")
            .or_else(|| quoted("unknown field `"))
            .or_else(|| {
                text.split_once(": ")
                    .map(|(head, _)| head)
                    .filter(|h| !h.is_empty() && h.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                    .map(str::to_string)
            })
            .unwrap_or_else(|| "config".to_string());
        Self { field, message: text }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } | RunError::Runtime(_) => 3,
        }
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        RunError::Runtime(err.to_string())
    }
}
