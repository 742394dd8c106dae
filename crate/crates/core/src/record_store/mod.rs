//! Patient-centric record model, labels, and validated ingestion of
//! externally produced embedding blocks.

pub mod blocks;
pub mod catalog;
pub mod labels;
pub mod record;

pub use blocks::{ingest_blocks, BlockStore, EmbeddingBlock};
pub use catalog::{Modality, SourceCatalog, SourceSpec};
pub use labels::{build_labels, LabeledSample, OutcomeRow, OutcomeTable, TaskKind};
pub use record::{Observation, PatientRecord, SamplingEvent, Timestamp};

use std::path::{Path, PathBuf};

/// Loads and validates a catalog manifest.
pub fn load_catalog(manifest_file: &Path) -> crate::Result<SourceCatalog> {
    SourceCatalog::load(manifest_file)
}

/// Reads a JSON-lines file of patient records, validating each.
pub fn load_records(path: &Path) -> crate::Result<Vec<PatientRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PatientRecord = serde_json::from_str(line)
            .map_err(|e| crate::Error::parse(path, format!("line {}: {e}", i + 1)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(records: &[PatientRecord], path: &Path) -> crate::Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| crate::Error::io(format!("writing {}", path.display()), e))
}

pub fn block_files_in(dir: &Path) -> crate::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| crate::Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}
