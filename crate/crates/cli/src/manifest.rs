//! Run manifests: resolved config, input hashes and the artifact census.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mmhate_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, StageExt};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Vocab,
    Features,
    Model,
    Predictions,
    Weights,
    Selection,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub key: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub kind: ArtifactKind,
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Resolved settings, minus `out_dir`.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects artifacts written under one output directory.
pub struct RunDir {
    root: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    pub fn create(command: &str, config: &PipelineConfig) -> Result<Self, CliError> {
        let root = config.path("out_dir");
        fs::create_dir_all(&root)
            .map_err(|e| Error::io(&root, e))
            .stage("setup")?;
        let settings = config
            .entries()
            .filter(|(k, _)| *k != "out_dir")
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        Ok(RunDir {
            root,
            manifest: Manifest {
                command: command.to_owned(),
                config: settings,
                inputs: Vec::new(),
                artifacts: Vec::new(),
            },
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, creating parent directories.
    pub fn path(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent, e))
                .stage("setup")?;
        }
        Ok(p)
    }

    pub fn input(&mut self, key: &str, path: &Path) -> Result<(), Error> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(InputRecord {
            key: key.to_owned(),
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Registers a file already written at `rel`.
    pub fn artifact(&mut self, name: &str, kind: ArtifactKind, rel: &str) -> Result<(), Error> {
        let sha256 = sha256_file(&self.root.join(rel))?;
        self.manifest.artifacts.push(ArtifactRecord {
            name: name.to_owned(),
            kind,
            path: rel.to_owned(),
            sha256,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| Error::io(&path, e))
            .stage("manifest")?;
        Ok(path)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))
}
