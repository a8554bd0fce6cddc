//! Config loading: a JSON object whose `command_defaults` section is
//! overlaid by the section named after the command.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULTS_KEY: &str = "command_defaults";

/// Effective configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveConfig {
    pub command: String,
    pub value: Value,
}

impl EffectiveConfig {
    /// Hex SHA-256 of the canonical (key-sorted, compact) JSON.
    pub fn digest(&self) -> String {
        digest_value(&self.value)
    }

    pub fn parse<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(self.value.clone())
            .map_err(|e| CliError::usage(format!("invalid {} config: {e}", self.command)))
    }
}

pub fn digest_value(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).expect("JSON values serialize");
    hex::encode(Sha256::digest(bytes))
}

pub fn load(path: &Path, command: &str) -> Result<EffectiveConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    merge(&text, command)
}

pub fn merge(text: &str, command: &str) -> Result<EffectiveConfig, CliError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("config is not valid JSON: {e}")))?;
    let root = root
        .as_object()
        .ok_or_else(|| CliError::usage("config must be a JSON object"))?;
    let mut merged = Map::new();
    for key in [DEFAULTS_KEY, command] {
        match root.get(key) {
            None => {}
            Some(Value::Object(section)) => {
                for (k, v) in section {
                    merged.insert(k.clone(), v.clone());
                }
            }
            Some(_) => return Err(CliError::usage(format!("config section {key} must be an object"))),
        }
    }
    Ok(EffectiveConfig {
        command: command.to_string(),
        value: Value::Object(merged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_defaults() {
        let text = r#"{"command_defaults": {"dt": 0.01, "n": 5}, "simulate": {"n": 7}, "estimate": {"n": 9}}"#;
        let c = merge(text, "simulate").unwrap();
        assert_eq!(c.value["dt"], 0.01);
        assert_eq!(c.value["n"], 7);
        assert_eq!(merge(text, "bounds").unwrap().value["n"], 5);
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = merge(r#"{"simulate": {"a": 1, "b": [1.5, 2]}}"#, "simulate").unwrap();
        let b = merge(r#"{"simulate": {"b": [1.5, 2], "a": 1}}"#, "simulate").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn malformed_configs_are_usage_errors() {
        assert_eq!(merge("{", "simulate").unwrap_err().code, 2);
        assert_eq!(merge("[1]", "simulate").unwrap_err().code, 2);
        assert_eq!(merge(r#"{"simulate": 3}"#, "simulate").unwrap_err().code, 2);
    }
}
