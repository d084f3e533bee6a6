//! Experiment configuration: a TOML file with `[run]`, `[data]` and
//! `[pipeline]` tables, plus `key=value` overrides that win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use embfuse_core::pipeline::{EncoderMode, Method};
use embfuse_core::RunConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub dataset: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    /// Labels are arbitrary strings rather than integers.
    pub string_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub methods: Vec<Method>,
    pub encoder: EncoderMode,
    pub sizes: Vec<usize>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            methods: vec![Method::View1Only, Method::CatLock],
            encoder: EncoderMode::CnnR,
            sizes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub run: RunConfig,
    pub data: DataPaths,
    pub pipeline: PipelineSection,
}

impl Settings {
    /// Reads `path` (if any), applies `overrides` of the form
    /// `section.key=value` and resolves data paths against the file's
    /// directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Settings> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::format(p, e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut s: Settings = Settings::deserialize(toml::Value::Table(table)).map_err(|e| {
            let origin = path.map_or_else(|| "overrides".to_string(), |p| p.display().to_string());
            Error::usage(format!("{origin}: {e}"))
        })?;
        if let Some(dir) = path.and_then(Path::parent) {
            for p in [&mut s.data.dataset, &mut s.data.embeddings, &mut s.data.word_vectors].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        s.run.validate().map_err(|e| Error::usage(format!("invalid run configuration: {e}")))?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialise to TOML")
    }
}

/// `a.b.c=value`; the value is parsed as TOML and falls back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("override {spec:?} is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::usage(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::usage(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Everything that determines an experiment's metrics.
#[derive(Debug, Serialize)]
pub struct Fingerprint<'a> {
    pub run: &'a RunConfig,
    pub methods: &'a [Method],
    pub encoder: EncoderMode,
    pub sizes: &'a [usize],
    /// SHA-256 of each input file, in dataset, embeddings, word-vectors order.
    pub inputs: Vec<Option<String>>,
}

impl Fingerprint<'_> {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("fingerprint serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
