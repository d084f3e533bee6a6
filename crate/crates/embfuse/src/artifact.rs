//! Fitted models as JSON documents. f64 values round-trip exactly.

use std::fs;
use std::path::Path;

use embfuse_core::classifier::LinearClassifier;
use embfuse_core::combiner::Combiner;
use embfuse_core::encoder::{TextCnn, Vocabulary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COMBINER_FORMAT: &str = "embfuse-combiner/1";
pub const ENCODER_FORMAT: &str = "embfuse-encoder/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerArtifact {
    pub format: String,
    pub combiner: Combiner,
}

impl CombinerArtifact {
    pub fn new(combiner: Combiner) -> Self {
        CombinerArtifact {
            format: COMBINER_FORMAT.into(),
            combiner,
        }
    }
}

/// A trained text encoder with the vocabulary it indexes and, optionally,
/// its classification head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderBundle {
    pub format: String,
    pub vocab: Vocabulary,
    pub cnn: TextCnn,
    pub head: Option<LinearClassifier>,
}

impl EncoderBundle {
    pub fn new(vocab: Vocabulary, cnn: TextCnn, head: Option<LinearClassifier>) -> Self {
        EncoderBundle {
            format: ENCODER_FORMAT.into(),
            vocab,
            cnn,
            head,
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        if self.vocab.len() != self.cnn.vocab_size {
            return Err(Error::format(
                path,
                format!("vocabulary has {} tokens but the encoder expects {}", self.vocab.len(), self.cnn.vocab_size),
            ));
        }
        self.cnn.check_shapes().map_err(|e| Error::format(path, e.to_string()))?;
        if let Some(h) = &self.head {
            if h.weights.ncols() != self.cnn.output_dim() || h.bias.len() != h.weights.nrows() {
                return Err(Error::format(path, "head shape does not match the encoder output"));
            }
        }
        Ok(())
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn check_format(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::format(path, format!("format {found:?}, expected {expected:?}")));
    }
    Ok(())
}

pub fn load_combiner(path: &Path) -> Result<CombinerArtifact> {
    let a: CombinerArtifact = load_json(path)?;
    check_format(path, &a.format, COMBINER_FORMAT)?;
    Ok(a)
}

pub fn load_encoder(path: &Path) -> Result<EncoderBundle> {
    let b: EncoderBundle = load_json(path)?;
    check_format(path, &b.format, ENCODER_FORMAT)?;
    b.check(path)?;
    Ok(b)
}
