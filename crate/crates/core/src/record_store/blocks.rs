use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::SourceCatalog;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"HAIMEMB1";

/// One source's vector for one sample. Absent sources carry a zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBlock {
    pub sample_id: String,
    pub source_id: String,
    pub vector: Vec<f64>,
    #[serde(default = "present_default", skip_serializing)]
    pub present: bool,
}

fn present_default() -> bool {
    true
}

/// Validated per-source embedding vectors keyed by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStore {
    catalog: SourceCatalog,
    per_source: Vec<BTreeMap<String, Vec<f64>>>,
    samples: BTreeSet<String>,
}

impl BlockStore {
    pub fn new(catalog: SourceCatalog) -> Self {
        let per_source = vec![BTreeMap::new(); catalog.len()];
        BlockStore {
            catalog,
            per_source,
            samples: BTreeSet::new(),
        }
    }

    pub fn catalog(&self) -> &SourceCatalog {
        &self.catalog
    }

    pub fn samples(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(String::as_str)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn contains_sample(&self, sample_id: &str) -> bool {
        self.samples.contains(sample_id)
    }

    /// Makes a sample known even if no source has a block for it.
    pub fn register_sample(&mut self, sample_id: &str) {
        if !self.samples.contains(sample_id) {
            self.samples.insert(sample_id.to_string());
        }
    }

    pub fn insert(&mut self, sample_id: &str, source_id: &str, vector: Vec<f64>) -> Result<()> {
        let idx = self.catalog.require(source_id)?;
        let expected = self.catalog.sources()[idx].dim;
        if vector.len() != expected {
            return Err(Error::Dimension {
                sample_id: sample_id.to_string(),
                source_id: source_id.to_string(),
                expected,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {sample_id}, source {source_id}"
            )));
        }
        let slot = &mut self.per_source[idx];
        if slot.contains_key(sample_id) {
            return Err(Error::DuplicateSample {
                sample_id: sample_id.to_string(),
                source_id: source_id.to_string(),
            });
        }
        slot.insert(sample_id.to_string(), vector);
        self.register_sample(sample_id);
        Ok(())
    }

    pub fn is_present(&self, sample_id: &str, source_index: usize) -> bool {
        self.per_source[source_index].contains_key(sample_id)
    }

    /// Copies the block into `out` (zeros when absent) and reports presence.
    pub fn write_vector(&self, sample_id: &str, source_index: usize, out: &mut [f64]) -> bool {
        match self.per_source[source_index].get(sample_id) {
            Some(v) => {
                out.copy_from_slice(v);
                true
            }
            None => {
                out.iter_mut().for_each(|x| *x = 0.0);
                false
            }
        }
    }

    pub fn block(&self, sample_id: &str, source_id: &str) -> Result<EmbeddingBlock> {
        let idx = self.catalog.require(source_id)?;
        let mut vector = vec![0.0; self.catalog.sources()[idx].dim];
        let present = self.write_vector(sample_id, idx, &mut vector);
        Ok(EmbeddingBlock {
            sample_id: sample_id.to_string(),
            source_id: source_id.to_string(),
            vector,
            present,
        })
    }

    /// Every block of every known sample, absent ones zero-filled, source-major.
    pub fn blocks(&self) -> impl Iterator<Item = EmbeddingBlock> + '_ {
        self.catalog.sources().iter().flat_map(move |s| {
            self.samples
                .iter()
                .map(move |id| self.block(id, &s.id).expect("catalog source"))
        })
    }

    /// Writes the present blocks of the given sources (all when `None`) as JSON lines.
    pub fn write_jsonl(&self, path: &Path, sources: Option<&[&str]>) -> Result<usize> {
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        let mut n = 0;
        for (idx, spec) in self.catalog.sources().iter().enumerate() {
            if let Some(filter) = sources {
                if !filter.contains(&spec.id.as_str()) {
                    continue;
                }
            }
            for (sample_id, vector) in &self.per_source[idx] {
                let line = serde_json::to_string(&JsonlRecord {
                    sample_id,
                    source_id: &spec.id,
                    vector,
                })
                .expect("block serializes");
                writeln!(w, "{line}").map_err(|e| Error::io("writing blocks", e))?;
                n += 1;
            }
        }
        w.flush().map_err(|e| Error::io("writing blocks", e))?;
        Ok(n)
    }

    /// Writes one source in the compact binary layout; the file stem should be
    /// the source id for re-ingestion.
    pub fn write_binary(&self, path: &Path, source_id: &str) -> Result<usize> {
        let idx = self.catalog.require(source_id)?;
        let dim = self.catalog.sources()[idx].dim;
        let records = &self.per_source[idx];
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io("writing binary blocks", e);
        w.write_all(BINARY_MAGIC).map_err(io)?;
        w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
        for (sample_id, vector) in records {
            let id = sample_id.as_bytes();
            let len = u16::try_from(id.len())
                .map_err(|_| Error::Validation(format!("sample id too long: {sample_id}")))?;
            w.write_all(&len.to_le_bytes()).map_err(io)?;
            w.write_all(id).map_err(io)?;
            for v in vector {
                w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
        Ok(records.len())
    }
}

#[derive(Serialize)]
struct JsonlRecord<'a> {
    sample_id: &'a str,
    source_id: &'a str,
    vector: &'a [f64],
}

#[derive(Deserialize)]
struct JsonlRecordOwned {
    sample_id: String,
    source_id: String,
    vector: Vec<f64>,
}

/// Reads block files into a validated store. Files starting with the binary
/// magic are read as the compact layout, with the source id taken from the
/// file stem; everything else is read as JSON lines.
pub fn ingest_blocks(catalog: &SourceCatalog, files: &[PathBuf]) -> Result<BlockStore> {
    let mut store = BlockStore::new(catalog.clone());
    for path in files {
        let mut file =
            File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut magic = [0u8; 8];
        let n = read_up_to(&mut file, &mut magic)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        drop(file);
        if n == 8 && &magic == BINARY_MAGIC {
            read_binary(&mut store, path)?;
        } else {
            read_jsonl(&mut store, path)?;
        }
    }
    Ok(store)
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            k => filled += k,
        }
    }
    Ok(filled)
}

fn read_jsonl(store: &mut BlockStore, path: &Path) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecordOwned = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
        store.insert(&rec.sample_id, &rec.source_id, rec.vector)?;
    }
    Ok(())
}

fn read_binary(store: &mut BlockStore, path: &Path) -> Result<()> {
    let source_id = binary_source_id(path)?;
    let idx = store.catalog.require(&source_id)?;
    let expected = store.catalog.sources()[idx].dim;
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut cur = &bytes[8..];
    let truncated = || Error::parse(path, "truncated binary block file");
    let dim = u32::from_le_bytes(take(&mut cur, 4).ok_or_else(truncated)?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(take(&mut cur, 8).ok_or_else(truncated)?.try_into().unwrap());
    if dim != expected {
        return Err(Error::Dimension {
            sample_id: "<file header>".into(),
            source_id,
            expected,
            actual: dim,
        });
    }
    for _ in 0..count {
        let len = u16::from_le_bytes(take(&mut cur, 2).ok_or_else(truncated)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(&mut cur, len).ok_or_else(truncated)?)
            .map_err(|e| Error::parse(path, e))?
            .to_string();
        let raw = take(&mut cur, dim * 4).ok_or_else(truncated)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        store.insert(&id, &source_id, vector)?;
    }
    if !cur.is_empty() {
        return Err(Error::parse(path, "trailing bytes after declared record count"));
    }
    Ok(())
}

fn binary_source_id(path: &Path) -> Result<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| Error::parse(path, "cannot derive source id from file name"))
}

fn take<'a>(cur: &mut &'a [u8], n: usize) -> Option<&'a [u8]> {
    if cur.len() < n {
        return None;
    }
    let (head, tail) = cur.split_at(n);
    *cur = tail;
    Some(head)
}
