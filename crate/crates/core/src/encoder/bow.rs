use alloc::vec::Vec;

use crate::dataset::LabeledDataset;
use crate::embedding::{EmbeddingSet, Mat};
use crate::error::Result;

use super::vocab::{Vocabulary, PAD};

/// Token-count vectors over the vocabulary, l2-normalised. Sentences are
/// truncated to `max_len` tokens first; a sentence with no tokens maps to zero.
pub fn bow_encode_texts(texts: &[alloc::string::String], vocab: &Vocabulary, max_len: usize) -> Result<EmbeddingSet> {
    let v = vocab.len();
    let mut m = Mat::zeros(texts.len(), v);
    for (i, t) in texts.iter().enumerate() {
        let idx: Vec<usize> = vocab.encode_text(t).into_iter().take(max_len).collect();
        for &k in &idx {
            if k != PAD {
                m[(i, k)] += 1.0;
            }
        }
        let norm = m.row(i).norm();
        if norm > 0.0 {
            m.row_mut(i).scale_mut(1.0 / norm);
        }
    }
    EmbeddingSet::new(m, "bow")
}

pub fn bow_encode(ds: &LabeledDataset, vocab: &Vocabulary) -> Result<EmbeddingSet> {
    bow_encode_texts(ds.texts(), vocab, super::cnn::DEFAULT_MAX_LEN)
}
