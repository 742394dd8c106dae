use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{SamplingEvent, Timestamp};
use crate::error::{Error, Result};

/// Outcome rows for the discharge and mortality tasks use this task id:
/// `value` 1 means discharged alive at `event_time`, 0 means died at `event_time`.
pub const DISPOSITION_TASK: &str = "disposition";

/// Label horizon for the discharge and mortality tasks, in hours, inclusive.
pub const HORIZON_HOURS: f64 = 48.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TaskKind {
    /// Binary finding read from outcome rows tagged with the finding name;
    /// raw values other than 0 and 1 are dropped.
    Pathology(String),
    Discharge48h,
    Mortality48h,
}

impl TaskKind {
    pub fn parse(id: &str) -> TaskKind {
        match id {
            "discharge48h" => TaskKind::Discharge48h,
            "mortality48h" => TaskKind::Mortality48h,
            other => TaskKind::Pathology(other.to_string()),
        }
    }

    pub fn id(&self) -> &str {
        match self {
            TaskKind::Pathology(name) => name,
            TaskKind::Discharge48h => "discharge48h",
            TaskKind::Mortality48h => "mortality48h",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample_id: String,
    pub patient_id: String,
    pub sampling_time: Timestamp,
    pub task_id: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub sample_id: String,
    pub task_id: String,
    pub value: f64,
    #[serde(default)]
    pub event_time: Option<f64>,
}

/// Raw outcomes keyed by (sample_id, task_id).
#[derive(Debug, Clone, Default)]
pub struct OutcomeTable {
    rows: HashMap<(String, String), OutcomeRow>,
}

impl OutcomeTable {
    pub fn from_rows(rows: impl IntoIterator<Item = OutcomeRow>) -> Result<Self> {
        let mut table = OutcomeTable::default();
        for row in rows {
            let key = (row.sample_id.clone(), row.task_id.clone());
            if table.rows.insert(key, row.clone()).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate outcome row for sample {} task {}",
                    row.sample_id, row.task_id
                )));
            }
        }
        Ok(table)
    }

    /// Reads a CSV with header `sample_id,task_id,value,event_time`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
        let rows = rdr
            .deserialize::<OutcomeRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, e))?;
        Self::from_rows(rows)
    }

    pub fn write(rows: &[OutcomeRow], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(|e| Error::io("writing outcomes", e))
    }

    pub fn get(&self, sample_id: &str, task_id: &str) -> Option<&OutcomeRow> {
        self.rows.get(&(sample_id.to_string(), task_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads a sampling-event index: CSV `sample_id,patient_id,admission_id,sampling_time`.
pub fn load_sampling_events(path: &Path) -> Result<Vec<SamplingEvent>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    rdr.deserialize::<SamplingEvent>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(path, e))
}

pub fn write_sampling_events(events: &[SamplingEvent], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for e in events {
        w.serialize(e).map_err(|err| Error::parse(path, err))?;
    }
    w.flush().map_err(|e| Error::io("writing sampling events", e))
}

/// Builds binary labels for `task` at each sampling event.
pub fn build_labels(
    task: &TaskKind,
    samples: &[SamplingEvent],
    outcomes: &OutcomeTable,
) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let label = match task {
            TaskKind::Pathology(name) => match outcomes.get(&s.sample_id, name) {
                Some(row) if row.value == 1.0 => Some(1),
                Some(row) if row.value == 0.0 => Some(0),
                _ => None,
            },
            TaskKind::Discharge48h | TaskKind::Mortality48h => {
                let row = outcomes.get(&s.sample_id, DISPOSITION_TASK).ok_or_else(|| {
                    Error::MissingOutcome {
                        sample_id: s.sample_id.clone(),
                        task: task.id().to_string(),
                    }
                })?;
                let at = row.event_time.ok_or_else(|| Error::MissingOutcome {
                    sample_id: s.sample_id.clone(),
                    task: format!("{} (no event_time)", task.id()),
                })?;
                let within = at - s.sampling_time <= HORIZON_HOURS;
                let alive = row.value == 1.0;
                let hit = match task {
                    TaskKind::Discharge48h => alive && within,
                    _ => !alive && within,
                };
                Some(hit as u8)
            }
        };
        if let Some(label) = label {
            out.push(LabeledSample {
                sample_id: s.sample_id.clone(),
                patient_id: s.patient_id.clone(),
                sampling_time: s.sampling_time,
                task_id: task.id().to_string(),
                label,
            });
        }
    }
    Ok(out)
}
