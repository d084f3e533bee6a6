//! Whitespace-separated word vectors: `token v1 v2 ...` per line, with an
//! optional `count dim` header line.

use std::fs;
use std::io::Write;
use std::path::Path;

use embfuse_core::encoder::WordVectors;

use crate::error::{Error, Result};

pub fn load_word_vectors(path: &Path) -> Result<WordVectors> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut declared = None;
    if let Some((_, first)) = lines.peek() {
        let parts: Vec<&str> = first.split_whitespace().collect();
        if let [count, dim] = parts.as_slice() {
            if let (Ok(c), Ok(d)) = (count.parse::<usize>(), dim.parse::<usize>()) {
                declared = Some((c, d));
                lines.next();
            }
        }
    }
    let mut wv: Option<WordVectors> = declared.map(|(_, d)| WordVectors::new(d));
    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line has a token");
        let values = parts
            .enumerate()
            .map(|(j, p)| {
                p.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("line {}: value {j} is not a number: {p:?}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::format(path, format!("line {}: token {token:?} has no values", i + 1)));
        }
        let set = wv.get_or_insert_with(|| WordVectors::new(values.len()));
        set.insert(token.to_string(), values)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
    }
    let wv = wv.ok_or_else(|| Error::format(path, "no word vectors"))?;
    if let Some((count, _)) = declared {
        if count != wv.len() {
            return Err(Error::format(path, format!("header declares {count} vectors, found {}", wv.len())));
        }
    }
    Ok(wv)
}

/// Writes with a `count dim` header, tokens in sorted order.
pub fn write_word_vectors(path: &Path, wv: &WordVectors) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    writeln!(f, "{} {}", wv.len(), wv.dim()).map_err(io)?;
    for (token, v) in wv.iter() {
        write!(f, "{token}").map_err(io)?;
        for x in v {
            write!(f, " {x:?}").map_err(io)?;
        }
        writeln!(f).map_err(io)?;
    }
    f.flush().map_err(io)
}
