//! Bit-exact embedding exchange format.
//!
//! Matrix files: magic "RDMX", version u16 = 1, rows u64, cols u64,
//! dtype u8 = 1 (float32), row-major little-endian payload, CRC32 footer
//! over header + payload. Relevance files: plain text, one
//! `query_row document_row` pair per line.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};

use crate::model::{Corpus, MultimodalVector, RetrievalDataset};
use crate::{RdError, Result};

pub const MAGIC: &[u8; 4] = b"RDMX";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;

pub fn store_matrix(path: &Path, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(RdError::Internal(format!(
            "matrix payload has {} entries, expected {rows} x {cols}",
            data.len()
        )));
    }
    let mut buf = Vec::with_capacity(23 + 4 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    buf.push(DTYPE_F32);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let name = path.display();
    let mut buf = Vec::new();
    fs::File::open(path)
        .map_err(|e| RdError::Data(format!("{name}: {e}")))?
        .read_to_end(&mut buf)?;
    if buf.len() < 27 {
        return Err(RdError::Data(format!("{name}: truncated header")));
    }
    if &buf[0..4] != MAGIC {
        return Err(RdError::Data(format!("{name}: bad magic, not an RDMX file")));
    }
    let version = u16::from_le_bytes(buf[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(RdError::Data(format!("{name}: unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(buf[6..14].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(buf[14..22].try_into().unwrap()) as usize;
    if buf[22] != DTYPE_F32 {
        return Err(RdError::Data(format!("{name}: unsupported dtype {}", buf[22])));
    }
    let expected = 23 + 4 * rows * cols + 4;
    if buf.len() != expected {
        return Err(RdError::Data(format!(
            "{name}: file is {} bytes, expected {expected} for {rows} x {cols}",
            buf.len()
        )));
    }
    let body = &buf[..expected - 4];
    let stored_crc = u32::from_le_bytes(buf[expected - 4..].try_into().unwrap());
    let crc = crc32fast::hash(body);
    if crc != stored_crc {
        return Err(RdError::Data(format!(
            "{name}: CRC mismatch (stored {stored_crc:08x}, computed {crc:08x})"
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in body[23..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(RdError::Data(format!("{name}: non-finite entry")));
        }
        data.push(v);
    }
    Ok((rows, cols, data))
}

pub fn store_relevance(path: &Path, relevant_index: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (q, &d) in relevant_index.iter().enumerate() {
        out.push_str(&format!("{q} {d}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_relevance(path: &Path, n_queries: usize, n_docs: usize) -> Result<Vec<usize>> {
    let name = path.display();
    let text = fs::read_to_string(path).map_err(|e| RdError::Data(format!("{name}: {e}")))?;
    let mut map = vec![None; n_queries];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| RdError::Data(format!("{name}:{}: expected two columns", lineno + 1)))?
                .parse()
                .map_err(|_| RdError::Data(format!("{name}:{}: not an unsigned integer", lineno + 1)))
        };
        let q = parse(it.next())?;
        let d = parse(it.next())?;
        if q >= n_queries || d >= n_docs {
            return Err(RdError::Data(format!(
                "{name}:{}: pair ({q}, {d}) out of range for {n_queries} queries x {n_docs} documents",
                lineno + 1
            )));
        }
        if map[q].is_some() {
            return Err(RdError::Data(format!("{name}:{}: duplicate query row {q}", lineno + 1)));
        }
        map[q] = Some(d);
    }
    map.into_iter()
        .enumerate()
        .map(|(q, d)| d.ok_or_else(|| RdError::Data(format!("{name}: query row {q} has no relevant document"))))
        .collect()
}

/// File set consumed by the ingest path, one matrix per modality per side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestPaths {
    pub query_files: Vec<PathBuf>,
    pub doc_files: Vec<PathBuf>,
    pub relevance_file: PathBuf,
}

fn rows_to_parts(rows: usize, cols: usize, data: &[f32]) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|r| data[r * cols..(r + 1) * cols].iter().map(|&v| v as f64).collect())
        .collect()
}

/// Load per-modality query and document matrices plus relevance, with
/// cross-file row-count validation naming the offending files.
pub fn load_embeddings(
    paths: &IngestPaths,
) -> Result<(Vec<MultimodalVector>, Vec<MultimodalVector>, Vec<usize>)> {
    if paths.query_files.len() != paths.doc_files.len() || paths.query_files.is_empty() {
        return Err(RdError::Config(
            "need the same nonzero number of query and document files".into(),
        ));
    }
    let load_side = |files: &[PathBuf]| -> Result<Vec<Vec<Vec<f64>>>> {
        let mut per_modality = Vec::new();
        let mut first: Option<(usize, &PathBuf)> = None;
        for f in files {
            let (rows, cols, data) = load_matrix(f)?;
            match first {
                Some((r0, f0)) if rows != r0 => {
                    return Err(RdError::Data(format!(
                        "row count mismatch: {} has {rows} rows but {} has {r0}",
                        f.display(),
                        f0.display()
                    )));
                }
                None => first = Some((rows, f)),
                _ => {}
            }
            per_modality.push(rows_to_parts(rows, cols, &data));
        }
        Ok(per_modality)
    };
    let q_parts = load_side(&paths.query_files)?;
    let d_parts = load_side(&paths.doc_files)?;
    let n_q = q_parts[0].len();
    let n_d = d_parts[0].len();
    let relevance = load_relevance(&paths.relevance_file, n_q, n_d)?;

    let assemble = |parts: Vec<Vec<Vec<f64>>>, n: usize| -> Result<Vec<MultimodalVector>> {
        (0..n)
            .map(|i| MultimodalVector::new(parts.iter().map(|m| m[i].clone()).collect()))
            .collect()
    };
    Ok((assemble(q_parts, n_q)?, assemble(d_parts, n_d)?, relevance))
}

/// Round every coordinate through f32, exactly as the file format stores it.
pub fn round_trip_f32(items: &[MultimodalVector]) -> Vec<MultimodalVector> {
    items
        .iter()
        .map(|v| MultimodalVector {
            parts: v.parts.iter().map(|p| p.iter().map(|&x| x as f32 as f64).collect()).collect(),
        })
        .collect()
}

/// Export a dataset and corpus as RDMX matrices plus a relevance file.
pub fn export_dataset(dataset: &RetrievalDataset, corpus: &Corpus, dir: &Path) -> Result<IngestPaths> {
    fs::create_dir_all(dir)?;
    let store_side = |items: &[MultimodalVector], stem: &str| -> Result<Vec<PathBuf>> {
        let m_count = items[0].parts.len();
        (0..m_count)
            .map(|m| {
                let cols = items[0].parts[m].len();
                let data: Vec<f32> =
                    items.iter().flat_map(|v| v.parts[m].iter().map(|&x| x as f32)).collect();
                let path = dir.join(format!("{stem}_m{m}.rdmx"));
                store_matrix(&path, items.len(), cols, &data)?;
                Ok(path)
            })
            .collect()
    };
    let query_files = store_side(&dataset.queries, "queries")?;
    let doc_files = store_side(&corpus.documents, "docs")?;
    let relevance_file = dir.join("relevance.txt");
    store_relevance(&relevance_file, &dataset.relevant_index)?;
    Ok(IngestPaths { query_files, doc_files, relevance_file })
}
