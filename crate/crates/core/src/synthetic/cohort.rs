//! Linear-Gaussian latent cohorts with per-source informativeness,
//! redundancy and missingness.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::sigmoid;
use crate::record_store::labels::OutcomeRow;
use crate::record_store::{
    BlockStore, LabeledSample, Modality, SamplingEvent, SourceCatalog, SourceSpec,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceGen {
    pub id: String,
    pub modality: Modality,
    pub dim: usize,
    /// Latent coordinates this source observes.
    pub latents: Vec<usize>,
    /// Fraction of projection entries forced to zero.
    #[serde(default)]
    pub sparsity: f64,
    pub noise_sd: f64,
    /// Scale of the latent projection; 0 leaves only noise.
    pub informativeness: f64,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleCount {
    Fixed(usize),
    Range { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default = "default_task")]
    pub task_id: String,
    pub n_patients: usize,
    pub samples_per_patient: SampleCount,
    pub latent_dim: usize,
    /// Share of latent variance common to all samples of a patient.
    #[serde(default)]
    pub patient_correlation: f64,
    /// Label direction in latent space; uniform when absent.
    #[serde(default)]
    pub label_weights: Option<Vec<f64>>,
    pub label_sharpness: f64,
    pub sources: Vec<SourceGen>,
    pub seed: u64,
}

fn default_task() -> String {
    "synthetic".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub sample_id: String,
    pub patient_id: String,
    pub latent: Vec<f64>,
    pub logit: f64,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub store: BlockStore,
    pub samples: Vec<LabeledSample>,
    pub events: Vec<SamplingEvent>,
    pub outcomes: Vec<OutcomeRow>,
    pub latents: Vec<LatentRecord>,
}

impl CohortSpec {
    pub fn catalog(&self) -> Result<SourceCatalog> {
        SourceCatalog::new(
            self.sources
                .iter()
                .map(|s| SourceSpec::new(&s.id, s.modality, s.dim))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.latent_dim == 0 || self.sources.is_empty() {
            return Err(Error::Spec("need patients, latent dims and sources".into()));
        }
        match self.samples_per_patient {
            SampleCount::Fixed(0) => return Err(Error::Spec("zero samples per patient".into())),
            SampleCount::Range { min, max } if min == 0 || min > max => {
                return Err(Error::Spec(format!("bad sample range {min}..={max}")))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.patient_correlation) {
            return Err(Error::Spec("patient_correlation must be in [0, 1)".into()));
        }
        if !self.label_sharpness.is_finite() {
            return Err(Error::Spec("label_sharpness must be finite".into()));
        }
        if let Some(w) = &self.label_weights {
            if w.len() != self.latent_dim || w.iter().all(|&v| v == 0.0) {
                return Err(Error::Spec("label_weights must be latent_dim long and non-zero".into()));
            }
        }
        for s in &self.sources {
            if !(0.0..=1.0).contains(&s.missing_rate) {
                return Err(Error::Spec(format!("{}: missing_rate outside [0, 1]", s.id)));
            }
            if !(s.noise_sd >= 0.0) {
                return Err(Error::Spec(format!("{}: negative noise_sd", s.id)));
            }
            if !(0.0..=1.0).contains(&s.sparsity) {
                return Err(Error::Spec(format!("{}: sparsity outside [0, 1]", s.id)));
            }
            if let Some(&bad) = s.latents.iter().find(|&&l| l >= self.latent_dim) {
                return Err(Error::Spec(format!("{}: latent index {bad} out of range", s.id)));
            }
        }
        Ok(())
    }

    /// Seven sources in modality pattern (1, 2, 2, 2), eight features each.
    /// Six sources observe two private latent coordinates apiece; `txt2`
    /// observes nothing. Patients get two samples with correlated latents.
    pub fn desk(seed: u64) -> CohortSpec {
        let layout: [(&str, Modality, Option<[usize; 2]>); 7] = [
            ("tab", Modality::Tabular, Some([0, 1])),
            ("ts1", Modality::Timeseries, Some([2, 3])),
            ("ts2", Modality::Timeseries, Some([4, 5])),
            ("txt1", Modality::Text, Some([6, 7])),
            ("txt2", Modality::Text, None),
            ("img1", Modality::Image, Some([8, 9])),
            ("img2", Modality::Image, Some([10, 11])),
        ];
        CohortSpec {
            task_id: default_task(),
            n_patients: 1000,
            samples_per_patient: SampleCount::Fixed(2),
            latent_dim: 12,
            patient_correlation: 0.5,
            label_weights: None,
            label_sharpness: 4.0,
            sources: layout
                .iter()
                .map(|(id, m, lat)| SourceGen {
                    id: id.to_string(),
                    modality: *m,
                    dim: 8,
                    latents: lat.map(|l| l.to_vec()).unwrap_or_default(),
                    sparsity: 0.0,
                    noise_sd: 1.0,
                    informativeness: if lat.is_some() { 1.0 } else { 0.0 },
                    missing_rate: 0.0,
                })
                .collect(),
            seed,
        }
    }

    /// Same as [`CohortSpec::desk`] but every informative source observes the
    /// same two latent coordinates, and the label depends on only those.
    pub fn desk_redundant(seed: u64) -> CohortSpec {
        let mut spec = Self::desk(seed);
        for s in &mut spec.sources {
            if s.informativeness > 0.0 {
                s.latents = vec![0, 1];
            }
        }
        let mut w = vec![0.0; spec.latent_dim];
        w[0] = 1.0;
        w[1] = 1.0;
        spec.label_weights = Some(w);
        spec
    }
}

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn generate_cohort(spec: &CohortSpec, catalog: &SourceCatalog) -> Result<SyntheticCohort> {
    spec.validate()?;
    if catalog.len() != spec.sources.len() {
        return Err(Error::Spec(format!(
            "spec has {} sources, catalog {}",
            spec.sources.len(),
            catalog.len()
        )));
    }
    for (g, c) in spec.sources.iter().zip(catalog.sources()) {
        if g.id != c.id || g.dim != c.dim || g.modality != c.modality {
            return Err(Error::Spec(format!(
                "source {} does not match catalog entry {}",
                g.id, c.id
            )));
        }
    }

    let weights = {
        let w = spec
            .label_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; spec.latent_dim]);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.into_iter().map(|v| v / norm).collect::<Vec<_>>()
    };

    // projection matrices, one independent stream per source
    let projections: Vec<Vec<f64>> = spec
        .sources
        .iter()
        .enumerate()
        .map(|(si, s)| {
            let mut r = rng::rng(rng::derive(spec.seed, 0x5000 + si as u64));
            let k = s.latents.len().max(1) as f64;
            (0..s.dim * s.latents.len())
                .map(|_| {
                    let v = normal(&mut r) / k.sqrt();
                    let keep = r.gen::<f64>() >= s.sparsity;
                    if keep {
                        v * s.informativeness
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut store = BlockStore::new(catalog.clone());
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut outcomes = Vec::new();
    let mut latents = Vec::new();
    let shared = spec.patient_correlation.sqrt();
    let own = (1.0 - spec.patient_correlation).sqrt();
    let width = (spec.n_patients.max(1) - 1).to_string().len();

    for p in 0..spec.n_patients {
        let mut r = rng::rng(rng::derive(spec.seed, 0x10_0000 + p as u64));
        let patient_id = format!("p{p:0width$}");
        let count = match spec.samples_per_patient {
            SampleCount::Fixed(k) => k,
            SampleCount::Range { min, max } => r.gen_range(min..=max),
        };
        let offset: Vec<f64> = (0..spec.latent_dim).map(|_| normal(&mut r)).collect();
        for k in 0..count {
            let sample_id = format!("{patient_id}_{k}");
            let z: Vec<f64> = offset
                .iter()
                .map(|u| shared * u + own * normal(&mut r))
                .collect();
            let logit = spec.label_sharpness * z.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
            let label = (r.gen::<f64>() < sigmoid(logit)) as u8;
            store.register_sample(&sample_id);
            for (si, s) in spec.sources.iter().enumerate() {
                let proj = &projections[si];
                let mut v = vec![0.0; s.dim];
                for (j, out) in v.iter_mut().enumerate() {
                    let signal: f64 = s
                        .latents
                        .iter()
                        .enumerate()
                        .map(|(c, &l)| proj[j * s.latents.len() + c] * z[l])
                        .sum();
                    *out = signal + s.noise_sd * normal(&mut r);
                }
                let missing = r.gen::<f64>() < s.missing_rate;
                if !missing {
                    store.insert(&sample_id, &s.id, v)?;
                }
            }
            let sampling_time = 24.0 * k as f64;
            samples.push(LabeledSample {
                sample_id: sample_id.clone(),
                patient_id: patient_id.clone(),
                sampling_time,
                task_id: spec.task_id.clone(),
                label,
            });
            events.push(SamplingEvent {
                sample_id: sample_id.clone(),
                patient_id: patient_id.clone(),
                admission_id: format!("{patient_id}_adm"),
                sampling_time,
            });
            outcomes.push(OutcomeRow {
                sample_id: sample_id.clone(),
                task_id: spec.task_id.clone(),
                value: label as f64,
                event_time: None,
            });
            latents.push(LatentRecord {
                sample_id,
                patient_id: patient_id.clone(),
                latent: z,
                logit,
                label,
            });
        }
    }
    Ok(SyntheticCohort {
        store,
        samples,
        events,
        outcomes,
        latents,
    })
}
