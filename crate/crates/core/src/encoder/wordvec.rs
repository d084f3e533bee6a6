use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pre-trained word vectors, all of one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WordVectors {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::BadRow {
                row: self.vectors.len(),
                message: alloc::format!("vector for {token:?} has {} values, expected {}", vector.len(), self.dim),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(alloc::format!("non-finite value in vector for {token:?}")));
        }
        if self.vectors.contains_key(&token) {
            return Err(Error::invalid(alloc::format!("duplicate token {token:?}")));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Tokens in sorted order with their vectors.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}
