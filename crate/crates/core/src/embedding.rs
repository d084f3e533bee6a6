use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Per-sentence embedding vectors from one view, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Mat,
    source_tag: String,
}

impl EmbeddingSet {
    /// Validates shape (n, dim >= 1) and finiteness.
    pub fn new(vectors: Mat, source_tag: impl Into<String>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::invalid(alloc::format!(
                "embedding set must be non-empty, got {}x{}",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        for i in 0..vectors.nrows() {
            for j in 0..vectors.ncols() {
                if !vectors[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(EmbeddingSet {
            vectors,
            source_tag: source_tag.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], source_tag: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::BadRow {
                    row: i,
                    message: alloc::format!("expected {} values, found {}", d, r.len()),
                });
            }
        }
        Self::new(Mat::from_fn(n, d, |i, j| rows[i][j]), source_tag)
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn into_vectors(self) -> Mat {
        self.vectors
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.vectors.row(i).iter().copied().collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            vectors: self.vectors.select_rows(indices),
            source_tag: self.source_tag.clone(),
        }
    }

    pub(crate) fn require_rows(&self, n: usize, context: &'static str) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.n(),
                context,
            });
        }
        Ok(())
    }

    pub(crate) fn require_dim(&self, d: usize, context: &'static str) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.dim(),
                context,
            });
        }
        Ok(())
    }
}

impl core::fmt::Display for EmbeddingSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "EmbeddingSet{{n={}, dim={}, tag={}}}", self.n(), self.dim(), self.source_tag)
    }
}

pub(crate) fn tag_of(a: &EmbeddingSet, b: &EmbeddingSet, op: &str) -> String {
    let mut s = op.to_string();
    s.push('(');
    s.push_str(a.source_tag());
    s.push(',');
    s.push_str(b.source_tag());
    s.push(')');
    s
}
