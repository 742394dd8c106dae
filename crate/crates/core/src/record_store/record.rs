use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours since an arbitrary epoch.
pub type Timestamp = f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: Timestamp,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub time: Timestamp,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEvent {
    pub time: Timestamp,
    pub reference: String,
}

/// Everything known about one hospitalization, time-stamped from admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub admission_id: String,
    pub admit_time: Timestamp,
    #[serde(default)]
    pub tabular_fields: BTreeMap<String, f64>,
    #[serde(default)]
    pub event_streams: BTreeMap<String, Vec<Observation>>,
    #[serde(default)]
    pub note_events: BTreeMap<String, Vec<NoteEvent>>,
    #[serde(default)]
    pub image_events: Vec<ImageEvent>,
}

/// A sampling event: the cutoff time at which one sample is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingEvent {
    pub sample_id: String,
    pub patient_id: String,
    pub admission_id: String,
    pub sampling_time: Timestamp,
}

fn check_sorted<'a>(
    what: &str,
    admit: Timestamp,
    times: impl Iterator<Item = Timestamp> + 'a,
) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in times {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("timestamp in {what}")));
        }
        if t < admit {
            return Err(Error::Validation(format!(
                "{what}: event at {t} precedes admission at {admit}"
            )));
        }
        if t < prev {
            return Err(Error::Validation(format!("{what}: timestamps decrease at {t}")));
        }
        prev = t;
    }
    Ok(())
}

impl PatientRecord {
    pub fn new(patient_id: &str, admission_id: &str, admit_time: Timestamp) -> Self {
        PatientRecord {
            patient_id: patient_id.to_string(),
            admission_id: admission_id.to_string(),
            admit_time,
            tabular_fields: BTreeMap::new(),
            event_streams: BTreeMap::new(),
            note_events: BTreeMap::new(),
            image_events: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.admit_time.is_finite() {
            return Err(Error::NonFinite(format!("admit_time of {}", self.admission_id)));
        }
        for (name, obs) in &self.event_streams {
            check_sorted(name, self.admit_time, obs.iter().map(|o| o.time))?;
            if obs.iter().any(|o| !o.value.is_finite()) {
                return Err(Error::NonFinite(format!("stream {name} of {}", self.admission_id)));
            }
        }
        for (name, notes) in &self.note_events {
            check_sorted(name, self.admit_time, notes.iter().map(|n| n.time))?;
        }
        check_sorted("image_events", self.admit_time, self.image_events.iter().map(|i| i.time))
    }

    /// Restricts the record to events at or before `t`. Tabular fields are kept.
    pub fn slice(&self, t: Timestamp) -> Result<PatientRecord> {
        if t.is_nan() || t < self.admit_time {
            return Err(Error::Domain(format!(
                "slice time {t} precedes admission at {}",
                self.admit_time
            )));
        }
        Ok(PatientRecord {
            patient_id: self.patient_id.clone(),
            admission_id: self.admission_id.clone(),
            admit_time: self.admit_time,
            tabular_fields: self.tabular_fields.clone(),
            event_streams: self
                .event_streams
                .iter()
                .map(|(k, v)| (k.clone(), prefix_until(v, t, |o| o.time).to_vec()))
                .collect(),
            note_events: self
                .note_events
                .iter()
                .map(|(k, v)| (k.clone(), prefix_until(v, t, |n| n.time).to_vec()))
                .collect(),
            image_events: prefix_until(&self.image_events, t, |i| i.time).to_vec(),
        })
    }

    /// One sampling event per distinct imaging time point, ids
    /// `<admission_id>_<index>`.
    pub fn sampling_events(&self) -> Vec<SamplingEvent> {
        let mut times: Vec<Timestamp> = self.image_events.iter().map(|i| i.time).collect();
        times.dedup();
        times
            .into_iter()
            .enumerate()
            .map(|(i, t)| SamplingEvent {
                sample_id: format!("{}_{}", self.admission_id, i),
                patient_id: self.patient_id.clone(),
                admission_id: self.admission_id.clone(),
                sampling_time: t,
            })
            .collect()
    }
}

fn prefix_until<T>(items: &[T], t: Timestamp, time: impl Fn(&T) -> Timestamp) -> &[T] {
    let end = items.partition_point(|x| time(x) <= t);
    &items[..end]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> PatientRecord {
        let mut r = PatientRecord::new("p1", "a1", 0.0);
        r.tabular_fields.insert("age".into(), 61.0);
        r.event_streams.insert(
            "hr".into(),
            [1.0, 5.0, 9.0]
                .iter()
                .map(|&t| Observation { time: t, value: t * 10.0 })
                .collect(),
        );
        r.image_events = vec![
            ImageEvent { time: 0.0, reference: "img0".into() },
            ImageEvent { time: 5.0, reference: "img1".into() },
        ];
        r
    }

    #[test]
    fn slice_keeps_events_up_to_cutoff() {
        let s = record().slice(5.0).unwrap();
        let times: Vec<f64> = s.event_streams["hr"].iter().map(|o| o.time).collect();
        assert_eq!(times, vec![1.0, 5.0]);
        assert_eq!(s.tabular_fields["age"], 61.0);
        assert_eq!(s.image_events.len(), 2);
    }

    #[test]
    fn slice_at_admission_is_inclusive() {
        let s = record().slice(0.0).unwrap();
        assert!(s.event_streams["hr"].is_empty());
        assert_eq!(s.image_events.len(), 1);
    }

    #[test]
    fn slice_after_last_event_is_identity() {
        let r = record();
        assert_eq!(r.slice(9.0).unwrap(), r);
        assert_eq!(r.slice(100.0).unwrap(), r);
    }

    #[test]
    fn slice_before_admission_fails() {
        assert!(matches!(record().slice(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_events_follow_images() {
        let ev = record().sampling_events();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[1].sample_id, "a1_1");
        assert_eq!(ev[1].sampling_time, 5.0);
    }

    #[test]
    fn validate_rejects_unsorted_and_early_events() {
        let mut r = record();
        r.event_streams.get_mut("hr").unwrap().swap(0, 2);
        assert!(r.validate().is_err());
        let mut r = record();
        r.image_events[0].time = -2.0;
        assert!(r.validate().is_err());
        assert!(record().validate().is_ok());
    }
}
