use std::path::Path;

use thiserror::Error;

use crate::protocol::{ExperimentConfig, ProtocolError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config key {key}: {constraint}")]
    Validation { key: String, constraint: String },
}

/// Parses `key = value` text with `[scene]`, `[train]` and `[experiment]`
/// sections (dotted `section.key = value` lines also work). Missing keys take
/// their defaults; unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
        ConfigError::Parse { line, msg: e.message().trim().to_string() }
    })?;
    cfg.validate().map_err(|e| match e {
        ProtocolError::InvalidConfig { key, constraint } => ConfigError::Validation { key, constraint },
        other => ConfigError::Validation { key: "config".into(), constraint: other.to_string() },
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// Renders a config in the file format; parsing the output yields an equal config.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}
