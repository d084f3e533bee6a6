//! Embedding matrices on disk.
//!
//! Binary: `EMBF`, u32 version 1, u64 n, u64 d, then `n * d` little-endian
//! f32 values, row-major. TSV: a `n<TAB>d` header, then one tab-separated row
//! per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use embfuse_core::{EmbeddingSet, Mat};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBF";
pub const VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Binary,
    Tsv,
}

impl EmbeddingFormat {
    /// `.tsv` and `.txt` are text; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => EmbeddingFormat::Tsv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map(|m| m.len()).ok();
    let mut reader = BufReader::new(file);
    let tag = path.file_stem().and_then(|s| s.to_str()).unwrap_or("embeddings").to_string();
    let mat = match format {
        EmbeddingFormat::Binary => read_binary(&mut reader, len, path)?,
        EmbeddingFormat::Tsv => read_tsv(reader, path)?,
    };
    Ok(EmbeddingSet::new(mat, tag).map_err(|e| e.context(path.display().to_string()))?)
}

pub fn write_embeddings(path: &Path, set: &EmbeddingSet, format: EmbeddingFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        EmbeddingFormat::Binary => write_binary(&mut w, set.vectors()),
        EmbeddingFormat::Tsv => write_tsv(&mut w, set.vectors()),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

/// Values are narrowed to f32.
pub fn write_binary<W: Write>(w: &mut W, m: &Mat) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for row in m.row_iter() {
        for &v in row.iter() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// `file_len`, when known, is checked against the header before allocating.
pub fn read_binary<R: Read>(r: &mut R, file_len: Option<u64>, path: &Path) -> Result<Mat> {
    let mut header = [0u8; HEADER_LEN as usize];
    r.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &header[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected EMBF"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let d = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
    let values = n
        .checked_mul(d)
        .filter(|v| v.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(path, format!("header n={n} d={d} overflows")))?;
    if let Some(len) = file_len {
        if len != HEADER_LEN + 4 * values {
            return Err(Error::format(
                path,
                format!("header says {n} x {d} but the body holds {} bytes", len.saturating_sub(HEADER_LEN)),
            ));
        }
    }
    let (n, d) = (n as usize, d as usize);
    let mut data = vec![0.0f64; n * d];
    let mut row = vec![0u8; 4 * d];
    for i in 0..n {
        r.read_exact(&mut row)
            .map_err(|_| Error::format(path, format!("row {i}: truncated")))?;
        for (j, chunk) in row.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(Error::format(path, format!("row {i}: non-finite value in column {j}")));
            }
            data[i * d + j] = v as f64;
        }
    }
    let mut extra = [0u8; 1];
    if matches!(r.read(&mut extra), Ok(1)) {
        return Err(Error::format(path, format!("trailing bytes after {n} rows")));
    }
    Ok(Mat::from_row_slice(n, d, &data))
}

/// Shortest round-trip decimal for every value.
pub fn write_tsv<W: Write>(w: &mut W, m: &Mat) -> std::io::Result<()> {
    writeln!(w, "{}\t{}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let mut first = true;
        for &v in row.iter() {
            if !first {
                w.write_all(b"\t")?;
            }
            first = false;
            write!(w, "{v:?}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tsv<R: BufRead>(r: R, path: &Path) -> Result<Mat> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(path, "empty file, expected an `n<TAB>d` header")),
    };
    let dims: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let (n, d) = match dims.as_slice() {
        [n, d] => (
            n.trim().parse::<usize>().map_err(|_| Error::format(path, format!("bad header {header:?}")))?,
            d.trim().parse::<usize>().map_err(|_| Error::format(path, format!("bad header {header:?}")))?,
        ),
        _ => return Err(Error::format(path, format!("bad header {header:?}, expected `n<TAB>d`"))),
    };
    let mut data = Vec::with_capacity(n.saturating_mul(d).min(1 << 24));
    let mut rows = 0;
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if rows == n {
            return Err(Error::format(path, format!("row {rows}: more rows than the header's {n}")));
        }
        let before = data.len();
        for (j, field) in line.split('\t').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("row {rows}: column {j} is not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("row {rows}: non-finite value in column {j}")));
            }
            data.push(v);
        }
        let got = data.len() - before;
        if got != d {
            return Err(Error::format(path, format!("row {rows}: has {got} values, header says {d}")));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::format(path, format!("header says {n} rows, found {rows}")));
    }
    Ok(Mat::from_row_slice(n, d, &data))
}
