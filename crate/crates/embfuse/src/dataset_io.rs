//! `label<TAB>text` datasets, one sentence per line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use embfuse_core::LabeledDataset;

use crate::error::{Error, Result};

/// Reads a dataset whose labels are contiguous integers from 0.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<LabeledDataset> {
    let rows = split_rows(text, path)?;
    let mut texts = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, label, sentence) in rows {
        let l: usize = label
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: label {label:?} is not a non-negative integer")))?;
        texts.push(sentence.to_string());
        labels.push(l);
    }
    Ok(LabeledDataset::new(texts, labels).map_err(|e| e.context(path.display().to_string()))?)
}

/// Reads a dataset with arbitrary string labels. Labels are numbered in
/// sorted order; the returned names are indexed by class.
pub fn load_dataset_named(path: &Path) -> Result<(LabeledDataset, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = split_rows(&text, path)?;
    let mut index: BTreeMap<&str, usize> = rows.iter().map(|(_, l, _)| (l.trim(), 0)).collect();
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let names = index.keys().map(|s| s.to_string()).collect();
    let labels = rows.iter().map(|(_, l, _)| index[l.trim()]).collect();
    let texts = rows.iter().map(|(_, _, t)| t.to_string()).collect();
    let ds = LabeledDataset::new(texts, labels).map_err(|e| e.context(path.display().to_string()))?;
    Ok((ds, names))
}

/// `index<TAB>name` per class.
pub fn write_label_map(path: &Path, names: &[String]) -> Result<()> {
    let mut out = String::new();
    for (i, n) in names.iter().enumerate() {
        out.push_str(&format!("{i}\t{n}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for (t, l) in ds.texts().iter().zip(ds.labels()) {
        if t.contains(['\n', '\t']) {
            return Err(Error::format(path, format!("text {t:?} contains a tab or newline")));
        }
        writeln!(f, "{l}\t{t}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// `(line number, label, text)` for every non-blank line.
fn split_rows<'a>(text: &'a str, path: &Path) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (label, sentence) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, format!("line {line_no}: expected `label<TAB>text`")))?;
        if sentence.trim().is_empty() {
            return Err(Error::format(path, format!("line {line_no}: empty text")));
        }
        rows.push((line_no, label, sentence));
    }
    if rows.is_empty() {
        return Err(Error::format(path, "empty file"));
    }
    Ok(rows)
}
