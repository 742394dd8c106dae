//! Per-source embeddings computed natively (tabular values and time-series
//! statistics), multi-image aggregation, normalization and fusion assembly.

pub mod fusion;
pub mod normalize;
pub mod signal;

pub use fusion::{aggregate_multi_image, assemble_fusion, block_ranges, fusion_matrix, FusionVector};
pub use normalize::Normalizer;
pub use signal::{
    featurize_event_group, featurize_signal, featurize_tabular, SignalStats, N_SIGNAL_FEATURES,
};

use crate::error::Result;
use crate::record_store::{BlockStore, Modality, PatientRecord, SamplingEvent, SourceCatalog};

/// Computes blocks for every tabular and time-series source that carries a
/// roster, one per sampling event, slicing each record at the sampling time.
pub fn featurize_records(
    catalog: &SourceCatalog,
    records: &[PatientRecord],
    samples: &[SamplingEvent],
) -> Result<BlockStore> {
    let by_admission: std::collections::HashMap<&str, &PatientRecord> =
        records.iter().map(|r| (r.admission_id.as_str(), r)).collect();
    let mut store = BlockStore::new(catalog.clone());
    for s in samples {
        let rec = by_admission.get(s.admission_id.as_str()).ok_or_else(|| {
            crate::Error::Validation(format!(
                "sample {} refers to unknown admission {}",
                s.sample_id, s.admission_id
            ))
        })?;
        let sliced = rec.slice(s.sampling_time)?;
        store.register_sample(&s.sample_id);
        for spec in catalog.sources() {
            if spec.signals.is_empty() {
                continue;
            }
            let v = match spec.modality {
                Modality::Tabular => featurize_tabular(&sliced, &spec.signals),
                Modality::Timeseries => featurize_event_group(&sliced, &spec.signals, None)?,
                _ => continue,
            };
            store.insert(&s.sample_id, &spec.id, v)?;
        }
    }
    Ok(store)
}
