//! Raw patient records whose time-series drift is tied to a latent risk
//! score, for exercising the featurization path end to end.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::sigmoid;
use crate::record_store::labels::OutcomeRow;
use crate::record_store::record::ImageEvent;
use crate::record_store::{
    LabeledSample, Modality, Observation, PatientRecord, SamplingEvent, SourceCatalog,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesSpec {
    #[serde(default = "default_task")]
    pub task_id: String,
    pub n_patients: usize,
    pub samples_per_admission: usize,
    pub horizon_hours: f64,
    pub min_events: usize,
    pub max_events: usize,
    /// Drift per hour is `drift_base + drift_coef · z` for latent risk `z`.
    pub drift_base: f64,
    pub drift_coef: f64,
    pub step_noise_sd: f64,
    pub label_sharpness: f64,
    pub seed: u64,
}

fn default_task() -> String {
    "synthetic".to_string()
}

impl Default for TimeseriesSpec {
    fn default() -> Self {
        TimeseriesSpec {
            task_id: default_task(),
            n_patients: 200,
            samples_per_admission: 2,
            horizon_hours: 96.0,
            min_events: 4,
            max_events: 24,
            drift_base: 0.0,
            drift_coef: 0.5,
            step_noise_sd: 0.5,
            label_sharpness: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RawCohort {
    pub records: Vec<PatientRecord>,
    pub events: Vec<SamplingEvent>,
    pub samples: Vec<LabeledSample>,
    pub outcomes: Vec<OutcomeRow>,
    /// Latent risk per admission, in record order.
    pub latent: Vec<f64>,
}

/// One admission per patient. Each roster signal of every time-series source
/// is a random walk with latent-linked drift over irregular, sorted times;
/// tabular roster fields are standard normal. Sampling events sit at evenly
/// spaced image times across the horizon.
pub fn generate_raw_timeseries(spec: &TimeseriesSpec, catalog: &SourceCatalog) -> Result<RawCohort> {
    if spec.n_patients == 0 || spec.samples_per_admission == 0 {
        return Err(Error::Spec("need patients and samples".into()));
    }
    if spec.min_events > spec.max_events || !(spec.horizon_hours > 0.0) {
        return Err(Error::Spec("bad event count range or horizon".into()));
    }
    if !(spec.step_noise_sd >= 0.0) {
        return Err(Error::Spec("negative step noise".into()));
    }
    let ts_sources: Vec<_> = catalog
        .sources()
        .iter()
        .filter(|s| s.modality == Modality::Timeseries && !s.signals.is_empty())
        .collect();
    if ts_sources.is_empty() {
        return Err(Error::Spec("catalog has no time-series source with a signal roster".into()));
    }

    let width = (spec.n_patients - 1).to_string().len();
    let mut out = RawCohort {
        records: Vec::new(),
        events: Vec::new(),
        samples: Vec::new(),
        outcomes: Vec::new(),
        latent: Vec::new(),
    };
    for p in 0..spec.n_patients {
        let mut r = rng::rng(rng::derive(spec.seed, 0x20_0000 + p as u64));
        let patient_id = format!("p{p:0width$}");
        let admission_id = format!("{patient_id}_adm");
        let z: f64 = StandardNormal.sample(&mut r);
        let label = (r.gen::<f64>() < sigmoid(spec.label_sharpness * z)) as u8;
        let drift = spec.drift_base + spec.drift_coef * z;

        let mut rec = PatientRecord::new(&patient_id, &admission_id, 0.0);
        for src in catalog.sources() {
            if src.modality == Modality::Tabular {
                for f in &src.signals {
                    rec.tabular_fields.insert(f.clone(), StandardNormal.sample(&mut r));
                }
            }
        }
        for src in &ts_sources {
            for name in &src.signals {
                let n = r.gen_range(spec.min_events..=spec.max_events);
                let mut times: Vec<f64> = (0..n).map(|_| r.gen::<f64>() * spec.horizon_hours).collect();
                times.sort_by(f64::total_cmp);
                let start: f64 = StandardNormal.sample(&mut r);
                let mut obs = Vec::with_capacity(n);
                let mut noise_acc = 0.0;
                let mut prev_t = times.first().copied().unwrap_or(0.0);
                for &t in &times {
                    if spec.step_noise_sd > 0.0 {
                        let e: f64 = StandardNormal.sample(&mut r);
                        noise_acc += spec.step_noise_sd * (t - prev_t).sqrt() * e;
                    }
                    obs.push(Observation {
                        time: t,
                        value: start + drift * (t - times[0]) + noise_acc,
                    });
                    prev_t = t;
                }
                rec.event_streams.insert(name.clone(), obs);
            }
        }
        for k in 0..spec.samples_per_admission {
            let t = spec.horizon_hours * (k + 1) as f64 / spec.samples_per_admission as f64;
            rec.image_events.push(ImageEvent {
                time: t,
                reference: format!("{admission_id}/img{k}"),
            });
        }
        for ev in rec.sampling_events() {
            out.samples.push(LabeledSample {
                sample_id: ev.sample_id.clone(),
                patient_id: patient_id.clone(),
                sampling_time: ev.sampling_time,
                task_id: spec.task_id.clone(),
                label,
            });
            out.outcomes.push(OutcomeRow {
                sample_id: ev.sample_id.clone(),
                task_id: spec.task_id.clone(),
                value: label as f64,
                event_time: None,
            });
            out.events.push(ev);
        }
        rec.validate()?;
        out.records.push(rec);
        out.latent.push(z);
    }
    Ok(out)
}
