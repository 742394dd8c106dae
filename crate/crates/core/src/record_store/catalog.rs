use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurization::N_SIGNAL_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Tabular,
    Timeseries,
    Text,
    Image,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Tabular,
        Modality::Timeseries,
        Modality::Text,
        Modality::Image,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Tabular => "tabular",
            Modality::Timeseries => "timeseries",
            Modality::Text => "text",
            Modality::Image => "image",
        }
    }

    pub fn parse(tag: &str) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.as_str() == tag)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One data source: a named input stream belonging to a modality.
///
/// `signals` is the field roster for tabular sources and the signal roster
/// for time-series sources; it is empty for externally embedded sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub id: String,
    pub modality: Modality,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signals: Vec<String>,
}

impl SourceSpec {
    pub fn new(id: &str, modality: Modality, dim: usize) -> Self {
        SourceSpec {
            id: id.to_string(),
            modality,
            dim,
            signals: Vec::new(),
        }
    }

    pub fn with_signals(mut self, signals: &[&str]) -> Self {
        self.signals = signals.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Ordered roster of data sources. The order is the canonical fusion order.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCatalog {
    sources: Vec<SourceSpec>,
    offsets: Vec<usize>,
}

#[derive(Deserialize)]
struct RawSource {
    id: Option<String>,
    modality: Option<String>,
    dim: Option<serde_json::Value>,
    #[serde(default)]
    signals: Vec<String>,
}

impl SourceCatalog {
    pub fn new(sources: Vec<SourceSpec>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Validation("catalog has no sources".into()));
        }
        let mut seen = HashSet::new();
        for s in &sources {
            if s.id.is_empty() {
                return Err(Error::Validation("source with empty id".into()));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate source id {:?}", s.id)));
            }
            if s.dim == 0 {
                return Err(Error::Validation(format!("source {:?} has zero dim", s.id)));
            }
            if !s.signals.is_empty() {
                let expected = match s.modality {
                    Modality::Tabular => s.signals.len(),
                    Modality::Timeseries => s.signals.len() * N_SIGNAL_FEATURES,
                    _ => {
                        return Err(Error::Validation(format!(
                            "source {:?}: rosters are only valid for tabular and timeseries sources",
                            s.id
                        )))
                    }
                };
                if expected != s.dim {
                    return Err(Error::Validation(format!(
                        "source {:?}: roster of {} entries implies dim {}, manifest says {}",
                        s.id,
                        s.signals.len(),
                        expected,
                        s.dim
                    )));
                }
            }
        }
        let mut offsets = Vec::with_capacity(sources.len());
        let mut acc = 0;
        for s in &sources {
            offsets.push(acc);
            acc += s.dim;
        }
        Ok(SourceCatalog { sources, offsets })
    }

    /// Loads a JSON manifest: a top-level list of `{"id", "modality", "dim"}`
    /// objects, optionally with a `"signals"` roster.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<RawSource> =
            serde_json::from_str(text).map_err(|e| Error::parse("<manifest>", e))?;
        let mut sources = Vec::with_capacity(raw.len());
        for (i, r) in raw.into_iter().enumerate() {
            let id = r
                .id
                .ok_or_else(|| Error::Validation(format!("entry {i} has no id")))?;
            let tag = r
                .modality
                .ok_or_else(|| Error::Validation(format!("source {id:?} has no modality")))?;
            let modality = Modality::parse(&tag).ok_or_else(|| {
                Error::Validation(format!("source {id:?} has unknown modality {tag:?}"))
            })?;
            let dim = match r.dim.as_ref().and_then(|d| d.as_u64()) {
                Some(d) => d as usize,
                None => {
                    return Err(Error::Validation(format!(
                        "source {id:?} has invalid dim {}",
                        r.dim.map(|d| d.to_string()).unwrap_or_else(|| "<missing>".into())
                    )))
                }
            };
            sources.push(SourceSpec {
                id,
                modality,
                dim,
                signals: r.signals,
            });
        }
        Self::new(sources)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.sources).expect("catalog serializes")
    }

    /// The eleven-source roster with its signal rosters. Image sources follow
    /// the prose dimensions (vp=18, vd=1024, vmp=18, vmd=1024).
    pub fn standard() -> Self {
        use Modality::*;
        let sources = vec![
            SourceSpec::new("de", Tabular, DEMOGRAPHIC_FIELDS.len()).with_signals(DEMOGRAPHIC_FIELDS),
            SourceSpec::new("ce", Timeseries, CHART_SIGNALS.len() * N_SIGNAL_FEATURES)
                .with_signals(CHART_SIGNALS),
            SourceSpec::new("le", Timeseries, LAB_SIGNALS.len() * N_SIGNAL_FEATURES)
                .with_signals(LAB_SIGNALS),
            SourceSpec::new("pe", Timeseries, PROCEDURE_SIGNALS.len() * N_SIGNAL_FEATURES)
                .with_signals(PROCEDURE_SIGNALS),
            SourceSpec::new("radn", Text, 768),
            SourceSpec::new("ecgn", Text, 768),
            SourceSpec::new("econ", Text, 768),
            SourceSpec::new("vp", Image, 18),
            SourceSpec::new("vd", Image, 1024),
            SourceSpec::new("vmp", Image, 18),
            SourceSpec::new("vmd", Image, 1024),
        ];
        Self::new(sources).expect("default catalog is valid")
    }

    pub fn sources(&self) -> &[SourceSpec] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.sources.iter().map(|s| s.dim).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&SourceSpec> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownSource(id.to_string()))
    }

    /// Start offset of each source inside the full fusion vector.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sources.iter().map(|s| s.id.as_str())
    }

    /// Modalities present, in `Modality::ALL` order.
    pub fn modalities(&self) -> Vec<Modality> {
        Modality::ALL
            .into_iter()
            .filter(|m| self.sources.iter().any(|s| s.modality == *m))
            .collect()
    }
}

/// A subset of catalog sources as a bitmask over canonical catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SourceSet(pub u64);

/// Largest catalog a `SourceSet` can address.
pub const MAX_SOURCES: usize = 64;

impl SourceSet {
    pub const EMPTY: SourceSet = SourceSet(0);

    pub fn full(n: usize) -> SourceSet {
        if n >= 64 {
            SourceSet(u64::MAX)
        } else {
            SourceSet((1u64 << n) - 1)
        }
    }

    pub fn single(index: usize) -> SourceSet {
        SourceSet(1u64 << index)
    }

    pub fn from_ids<S: AsRef<str>>(catalog: &SourceCatalog, ids: &[S]) -> Result<SourceSet> {
        let mut bits = 0u64;
        for id in ids {
            bits |= 1u64 << catalog.require(id.as_ref())?;
        }
        Ok(SourceSet(bits))
    }

    /// Parses a canonical `a+b+c` id.
    pub fn parse(catalog: &SourceCatalog, subset_id: &str) -> Result<SourceSet> {
        let ids: Vec<&str> = subset_id.split('+').collect();
        Self::from_ids(catalog, &ids)
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn with(self, index: usize) -> SourceSet {
        SourceSet(self.0 | 1u64 << index)
    }

    pub fn without(self, index: usize) -> SourceSet {
        SourceSet(self.0 & !(1u64 << index))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: SourceSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// Source ids in catalog order joined by `+`.
    pub fn canonical_id(self, catalog: &SourceCatalog) -> String {
        self.indices()
            .map(|i| catalog.sources()[i].id.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn dim(self, catalog: &SourceCatalog) -> usize {
        self.indices().map(|i| catalog.sources()[i].dim).sum()
    }

    pub fn modalities(self, catalog: &SourceCatalog) -> Vec<Modality> {
        let mut m: Vec<Modality> = self.indices().map(|i| catalog.sources()[i].modality).collect();
        m.sort();
        m.dedup();
        m
    }
}

pub const DEMOGRAPHIC_FIELDS: &[&str] = &[
    "anchor_age",
    "gender",
    "race",
    "marital_status",
    "insurance",
    "language",
];

/// Eight named chart signals plus a ninth slot whose identity is not known.
pub const CHART_SIGNALS: &[&str] = &[
    "heart_rate",
    "nbp_systolic",
    "nbp_diastolic",
    "respiratory_rate",
    "spo2",
    "gcs_verbal",
    "gcs_eye",
    "gcs_motor",
    "chart_unspecified_9",
];

pub const LAB_SIGNALS: &[&str] = &[
    "glucose",
    "potassium",
    "sodium",
    "chloride",
    "creatinine",
    "urea_nitrogen",
    "bicarbonate",
    "anion_gap",
    "hemoglobin",
    "hematocrit",
    "magnesium",
    "platelet_count",
    "phosphate",
    "white_blood_cells",
    "calcium_total",
    "mch",
    "red_blood_cells",
    "mchc",
    "mcv",
    "rdw",
    "neutrophils",
    "vancomycin",
];

pub const PROCEDURE_SIGNALS: &[&str] = &[
    "foley_catheter",
    "picc_line",
    "intubation",
    "peritoneal_dialysis",
    "bronchoscopy",
    "eeg",
    "dialysis_crrt",
    "dialysis_catheter",
    "chest_tube_removed",
    "hemodialysis",
];
