use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::LabeledDataset;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases and splits on whitespace; every non-alphanumeric character
/// becomes a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() {
                cur.extend(ch.to_lowercase());
            } else {
                if !cur.is_empty() {
                    out.push(core::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Dense token index. Index 0 is padding and 1 the unknown token; the rest
/// are sorted by descending frequency, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "Vec<String>", into = "Vec<String>"))]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds from already-ordered real tokens (specials are prepended).
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut all = alloc::vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens.into_iter().filter(|t| t != PAD_TOKEN && t != UNK_TOKEN));
        let index = all.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { index, tokens: all }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    /// Token indices of `text`, unknown tokens mapped to `UNK`.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.get(t).unwrap_or(UNK)).collect()
    }
}

/// Vocabulary over every sentence of the dataset (all splits).
pub fn build_vocab(ds: &LabeledDataset) -> Vocabulary {
    build_vocab_from_texts(ds.texts())
}

pub fn build_vocab_from_texts(texts: &[String]) -> Vocabulary {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for tok in tokenize(t) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut items: Vec<(String, usize)> = counts.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_tokens(items.into_iter().map(|(t, _)| t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Great, REALLY great!"), ["great", ",", "really", "great", "!"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = build_vocab_from_texts(&["a b".into(), "b c".into()]);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "b", "a", "c"]);
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.encode_text("c zzz"), [4, UNK]);
    }

    #[test]
    fn deterministic() {
        let texts: Vec<String> = ["x y z", "z y", "q"].iter().map(|s| s.to_string()).collect();
        assert_eq!(build_vocab_from_texts(&texts), build_vocab_from_texts(&texts));
    }
}
