use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record_store::catalog::SourceSet;
use crate::record_store::SourceCatalog;

/// Enumeration refuses catalogs with more included sources than this.
pub const MAX_ENUMERATED_SOURCES: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetDescriptor {
    pub subset_id: String,
    pub mask: SourceSet,
    pub n_sources: usize,
    /// Number of distinct modalities the subset touches.
    pub n_modalities: usize,
}

impl SubsetDescriptor {
    pub fn new(catalog: &SourceCatalog, mask: SourceSet) -> Self {
        SubsetDescriptor {
            subset_id: mask.canonical_id(catalog),
            mask,
            n_sources: mask.len(),
            n_modalities: mask.modalities(catalog).len(),
        }
    }
}

/// The sources left after exclusion, as a mask over the catalog.
pub fn included_sources<S: AsRef<str>>(catalog: &SourceCatalog, excluded: &[S]) -> Result<SourceSet> {
    let ex = SourceSet::from_ids(catalog, excluded)?;
    Ok(SourceSet(SourceSet::full(catalog.len()).0 & !ex.0))
}

/// All non-empty subsets of the non-excluded sources, in ascending bitmask order.
pub fn enumerate_subsets<S: AsRef<str>>(
    catalog: &SourceCatalog,
    excluded: &[S],
) -> Result<Vec<SubsetDescriptor>> {
    let included: Vec<usize> = included_sources(catalog, excluded)?.indices().collect();
    let k = included.len();
    if k > MAX_ENUMERATED_SOURCES {
        return Err(Error::Validation(format!(
            "refusing to enumerate 2^{k} subsets"
        )));
    }
    let mut out = Vec::with_capacity((1usize << k) - 1);
    for compact in 1u64..(1u64 << k) {
        let mut bits = 0u64;
        for (j, &idx) in included.iter().enumerate() {
            if compact >> j & 1 == 1 {
                bits |= 1u64 << idx;
            }
        }
        out.push(SubsetDescriptor::new(catalog, SourceSet(bits)));
    }
    Ok(out)
}

/// Number of subsets per exact-cover modality count.
pub fn modality_count_totals(subsets: &[SubsetDescriptor]) -> BTreeMap<usize, usize> {
    let mut totals = BTreeMap::new();
    for s in subsets {
        *totals.entry(s.n_modalities).or_insert(0) += 1;
    }
    totals
}
