//! Flat `key = value` pipeline settings.
//!
//! Files hold one setting per line; `#` starts a comment. Command-line
//! overrides (`--set key=value`) are applied after the file. Keys not known
//! to the pipeline are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A known key and its default (`None` = required).
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
}

const fn req(key: &'static str) -> KeySpec {
    KeySpec { key, default: None }
}

const fn opt(key: &'static str, default: &'static str) -> KeySpec {
    KeySpec {
        key,
        default: Some(default),
    }
}

pub const RUN_A_KEYS: &[KeySpec] = &[
    req("train"),
    req("eval"),
    opt("test", ""),
    req("out_dir"),
    opt("presets", "default,deep,light"),
    opt("ensemble_rounds", "25"),
    opt("min_count", "2"),
    opt("max_size", "10000"),
    opt("external_preds", ""),
];

pub const RUN_B_KEYS: &[KeySpec] = &[
    req("train"),
    req("eval"),
    opt("test", ""),
    req("embeddings"),
    req("out_dir"),
    opt("entity_source", "gazetteer"),
    opt("gazetteer", ""),
    opt("annotations", ""),
    opt("presets", "default,deep,light"),
    opt("compare_embeddings_only", "true"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
}

fn parse_line(line: &str) -> Result<Option<(String, String)>, String> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let (k, v) = content
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got {content:?}"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err("empty key".into());
    }
    Ok(Some((k.to_owned(), v.trim().to_owned())))
}

impl PipelineConfig {
    /// Resolves settings from an optional file plus overrides against `keys`.
    pub fn resolve(
        keys: &[KeySpec],
        file: Option<&Path>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut given: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                match parse_line(line) {
                    Ok(Some(kv)) => given.push(kv),
                    Ok(None) => {}
                    Err(msg) => {
                        return Err(CliError::Config(format!(
                            "{}:{}: {msg}",
                            path.display(),
                            i + 1
                        )))
                    }
                }
            }
        }
        for o in overrides {
            match parse_line(o) {
                Ok(Some(kv)) => given.push(kv),
                _ => return Err(CliError::Config(format!("bad override {o:?}"))),
            }
        }
        let mut values = BTreeMap::new();
        for (k, v) in given {
            if !keys.iter().any(|s| s.key == k) {
                return Err(CliError::Config(format!("unknown key {k:?}")));
            }
            values.insert(k, v);
        }
        for spec in keys {
            if !values.contains_key(spec.key) {
                match spec.default {
                    Some(d) => {
                        values.insert(spec.key.to_owned(), d.to_owned());
                    }
                    None => {
                        return Err(CliError::Config(format!(
                            "missing required key {:?}",
                            spec.key
                        )))
                    }
                }
            }
        }
        Ok(PipelineConfig { values })
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.get(key))
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn paths(&self, key: &str) -> Vec<PathBuf> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect()
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.get(key)
            .parse()
            .map_err(|_| CliError::Config(format!("{key} must be a non-negative integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Config(format!(
                "{key}: expected a boolean, got {other:?}"
            ))),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
