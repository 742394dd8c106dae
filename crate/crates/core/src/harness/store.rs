//! Append-only JSON-lines results store with a sidecar key index.
//!
//! Workers append one line per finished job. A torn trailing line left by an
//! interrupted run is dropped on reopen. `seal` rewrites the file in key order,
//! so the sealed bytes depend only on the set of records.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::GbdtHyperparams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub task_id: String,
    pub subset_id: String,
    /// Subset bitmask over catalog order.
    pub mask: u64,
    pub n_sources: usize,
    pub n_modalities: usize,
    pub repeat: usize,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<GbdtHyperparams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_auroc: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            task_id: self.task_id.clone(),
            mask: self.mask,
            repeat: self.repeat,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub task_id: String,
    pub mask: u64,
    pub repeat: usize,
}

impl RecordKey {
    fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.task_id, self.mask, self.repeat)
    }

    fn from_line(line: &str) -> Option<RecordKey> {
        let mut parts = line.split('\t');
        let task_id = parts.next()?.to_string();
        let mask = parts.next()?.parse().ok()?;
        let repeat = parts.next()?.parse().ok()?;
        parts.next().is_none().then_some(RecordKey { task_id, mask, repeat })
    }
}

/// Per-job timing, kept apart from the records so the store stays deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobTiming {
    pub task_id: String,
    pub subset_id: String,
    pub repeat: usize,
    pub wall_time: f64,
}

pub fn index_path(store: &Path) -> PathBuf {
    sidecar(store, "index")
}

pub fn timings_path(store: &Path) -> PathBuf {
    sidecar(store, "timings.jsonl")
}

fn sidecar(store: &Path, ext: &str) -> PathBuf {
    let mut name = store.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(ext);
    store.with_file_name(name)
}

#[derive(Debug)]
pub struct ResultsStore {
    path: PathBuf,
    records: BTreeMap<RecordKey, ExperimentRecord>,
    out: BufWriter<File>,
    index: BufWriter<File>,
    timings: BufWriter<File>,
}

impl ResultsStore {
    /// Opens (creating if needed) the store at `path`, repairing a torn tail.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        let records = Self::load_and_repair(path)?;
        let keys_on_disk = read_index(&index_path(path))?;
        let consistent = keys_on_disk.len() == records.len()
            && keys_on_disk.iter().all(|k| records.contains_key(k));
        if !consistent {
            write_index(&index_path(path), records.keys())?;
        }
        let append = |p: &Path| -> Result<BufWriter<File>> {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(p.display().to_string(), e))
        };
        Ok(ResultsStore {
            out: append(path)?,
            index: append(&index_path(path))?,
            timings: append(&timings_path(path))?,
            path: path.to_path_buf(),
            records,
        })
    }

    /// Reads records without opening for writing. A missing file is an empty store.
    pub fn read(path: &Path) -> Result<Vec<ExperimentRecord>> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let (records, _) = parse_lines(path)?;
        Ok(records.into_values().collect())
    }

    fn load_and_repair(path: &Path) -> Result<BTreeMap<RecordKey, ExperimentRecord>> {
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let (records, good_len) = parse_lines(path)?;
        let actual = fs::metadata(path).map_err(|e| Error::io(path.display().to_string(), e))?.len();
        if good_len < actual {
            let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            f.set_len(good_len).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(records)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.records.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ExperimentRecord> {
        self.records.values()
    }

    /// Appends and flushes one record. Keys already present are rejected.
    pub fn append(&mut self, record: ExperimentRecord, wall_time: f64) -> Result<()> {
        let key = record.key();
        if self.records.contains_key(&key) {
            return Err(Error::Validation(format!(
                "duplicate result key {}/{}/{}",
                record.task_id, record.subset_id, record.repeat
            )));
        }
        let line = serde_json::to_string(&record).expect("record serializes");
        let p = self.path.clone();
        writeln!(self.out, "{line}").map_err(|e| Error::io(&p.display().to_string(), e))?;
        self.out.flush().map_err(|e| Error::io(&p.display().to_string(), e))?;
        writeln!(self.index, "{}", key.to_line()).map_err(|e| Error::io(&p.display().to_string(), e))?;
        self.index.flush().map_err(|e| Error::io(&p.display().to_string(), e))?;
        let timing = JobTiming {
            task_id: record.task_id.clone(),
            subset_id: record.subset_id.clone(),
            repeat: record.repeat,
            wall_time,
        };
        writeln!(self.timings, "{}", serde_json::to_string(&timing).expect("timing serializes"))
            .map_err(|e| Error::io(&p.display().to_string(), e))?;
        self.timings.flush().map_err(|e| Error::io(&p.display().to_string(), e))?;
        self.records.insert(key, record);
        Ok(())
    }

    /// Rewrites the store and its index in key order via an atomic rename.
    pub fn seal(&mut self) -> Result<()> {
        let tmp = sidecar(&self.path, "tmp");
        {
            let f = File::create(&tmp).map_err(|e| Error::io(&tmp.display().to_string(), e))?;
            let mut w = BufWriter::new(f);
            for r in self.records.values() {
                let line = serde_json::to_string(r).expect("record serializes");
                writeln!(w, "{line}").map_err(|e| Error::io(&tmp.display().to_string(), e))?;
            }
            w.flush().map_err(|e| Error::io(&tmp.display().to_string(), e))?;
        }
        fs::rename(&tmp, &self.path).map_err(|e| Error::io(&self.path.display().to_string(), e))?;
        write_index(&index_path(&self.path), self.records.keys())?;
        let reopen = |p: &Path| {
            OpenOptions::new()
                .append(true)
                .open(p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(p.display().to_string(), e))
        };
        self.out = reopen(&self.path)?;
        self.index = reopen(&index_path(&self.path))?;
        Ok(())
    }
}

/// Parses complete lines, returning the records and the byte length of the valid prefix.
/// Only the final line may be malformed; anything earlier is a parse error.
fn parse_lines(path: &Path) -> Result<(BTreeMap<RecordKey, ExperimentRecord>, u64)> {
    let f = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(f);
    let mut records = BTreeMap::new();
    let mut good = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    let mut pending_error: Option<String> = None;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if let Some(msg) = pending_error.take() {
            return Err(Error::parse(path, msg));
        }
        let complete = line.ends_with('\n');
        let text = line.trim_end();
        if text.is_empty() {
            if complete {
                good += n as u64;
            }
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(text) {
            Ok(r) if complete => {
                let key = r.key();
                if records.insert(key, r).is_some() {
                    return Err(Error::parse(path, format!("line {lineno}: duplicate key")));
                }
                good += n as u64;
            }
            Ok(_) => {}
            Err(e) => pending_error = Some(format!("line {lineno}: {e}")),
        }
    }
    Ok((records, good))
}

fn read_index(path: &Path) -> Result<Vec<RecordKey>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(text.lines().filter_map(RecordKey::from_line).collect())
}

fn write_index<'a>(path: &Path, keys: impl Iterator<Item = &'a RecordKey>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?);
    for k in keys {
        writeln!(w, "{}", k.to_line()).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(task: &str, mask: u64, repeat: usize) -> ExperimentRecord {
        ExperimentRecord {
            task_id: task.into(),
            subset_id: format!("s{mask}"),
            mask,
            n_sources: mask.count_ones() as usize,
            n_modalities: 1,
            repeat,
            seed: repeat as u64,
            status: RunStatus::Ok,
            hyperparams: None,
            test_auroc: Some(0.75),
            n_train: 8,
            n_test: 2,
            error: None,
        }
    }

    #[test]
    fn seal_orders_by_key() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let keys = [("t", 3, 0), ("s", 1, 1), ("t", 1, 0), ("s", 1, 0)];
        let mut sa = ResultsStore::open(&a).unwrap();
        for &(t, m, r) in &keys {
            sa.append(rec(t, m, r), 0.1).unwrap();
        }
        sa.seal().unwrap();
        let mut sb = ResultsStore::open(&b).unwrap();
        for &(t, m, r) in keys.iter().rev() {
            sb.append(rec(t, m, r), 0.2).unwrap();
        }
        sb.seal().unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(fs::read(index_path(&a)).unwrap(), fs::read(index_path(&b)).unwrap());
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        {
            let mut s = ResultsStore::open(&p).unwrap();
            s.append(rec("t", 1, 0), 0.0).unwrap();
            s.append(rec("t", 2, 0), 0.0).unwrap();
        }
        let full = fs::read(&p).unwrap();
        fs::write(&p, &full[..full.len() - 7]).unwrap();
        let s = ResultsStore::open(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.contains(&rec("t", 1, 0).key()));
        assert!(!s.contains(&rec("t", 2, 0).key()));
        assert_eq!(read_index(&index_path(&p)).unwrap().len(), 1);
    }

    #[test]
    fn duplicate_append_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultsStore::open(&dir.path().join("r.jsonl")).unwrap();
        s.append(rec("t", 1, 0), 0.0).unwrap();
        assert!(s.append(rec("t", 1, 0), 0.0).is_err());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let good = serde_json::to_string(&rec("t", 1, 0)).unwrap();
        fs::write(&p, format!("{{oops\n{good}\n")).unwrap();
        assert!(matches!(ResultsStore::open(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn failure_rows_round_trip() {
        let mut r = rec("t", 1, 0);
        r.status = RunStatus::Failed;
        r.test_auroc = None;
        r.error = Some("fold 2 lacks positives".into());
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains("\"status\":\"failed\""));
        assert_eq!(serde_json::from_str::<ExperimentRecord>(&line).unwrap(), r);
    }
}
