use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::record_store::catalog::SourceSet;
use crate::record_store::{BlockStore, EmbeddingBlock, SourceCatalog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionVector {
    pub sample_id: String,
    /// Source ids in canonical catalog order.
    pub source_set: Vec<String>,
    pub vector: Vec<f64>,
}

impl FusionVector {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Concatenates the blocks of `source_set` in canonical catalog order,
/// regardless of the order `source_set` lists them.
pub fn assemble_fusion<S: AsRef<str>>(
    blocks: &[EmbeddingBlock],
    source_set: &[S],
    catalog: &SourceCatalog,
) -> Result<FusionVector> {
    let set = SourceSet::from_ids(catalog, source_set)?;
    let sample_id = blocks
        .first()
        .map(|b| b.sample_id.clone())
        .ok_or_else(|| Error::EmptySet("no blocks to fuse".into()))?;
    let mut vector = Vec::with_capacity(set.dim(catalog));
    let mut ids = Vec::with_capacity(set.len());
    for idx in set.indices() {
        let spec = &catalog.sources()[idx];
        let block = blocks
            .iter()
            .find(|b| b.source_id == spec.id)
            .ok_or_else(|| {
                Error::Validation(format!("sample {sample_id} has no block for {}", spec.id))
            })?;
        if block.vector.len() != spec.dim {
            return Err(Error::Dimension {
                sample_id: block.sample_id.clone(),
                source_id: spec.id.clone(),
                expected: spec.dim,
                actual: block.vector.len(),
            });
        }
        vector.extend_from_slice(&block.vector);
        ids.push(spec.id.clone());
    }
    Ok(FusionVector {
        sample_id,
        source_set: ids,
        vector,
    })
}

/// Fusion rows for `samples` over `set`, straight from a block store.
pub fn fusion_matrix<S: AsRef<str>>(store: &BlockStore, samples: &[S], set: SourceSet) -> Matrix {
    let catalog = store.catalog();
    let dim = set.dim(catalog);
    let mut m = Matrix::zeros(samples.len(), dim);
    for (r, sample) in samples.iter().enumerate() {
        let row = m.row_mut(r);
        let mut at = 0;
        for idx in set.indices() {
            let d = catalog.sources()[idx].dim;
            store.write_vector(sample.as_ref(), idx, &mut row[at..at + d]);
            at += d;
        }
    }
    m
}

/// Column range of each included source within a fusion row over `set`.
pub fn block_ranges(catalog: &SourceCatalog, set: SourceSet) -> Vec<(usize, std::ops::Range<usize>)> {
    let mut at = 0;
    set.indices()
        .map(|idx| {
            let d = catalog.sources()[idx].dim;
            let r = (idx, at..at + d);
            at += d;
            r
        })
        .collect()
}

/// Element-wise mean of several present blocks of one source family.
pub fn aggregate_multi_image(blocks: &[EmbeddingBlock]) -> Result<Vec<f64>> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::EmptySet("no images to aggregate".into()))?;
    let dim = first.vector.len();
    let mut acc = vec![0.0; dim];
    for b in blocks {
        if b.vector.len() != dim {
            return Err(Error::Dimension {
                sample_id: b.sample_id.clone(),
                source_id: b.source_id.clone(),
                expected: dim,
                actual: b.vector.len(),
            });
        }
        if !b.present {
            return Err(Error::Validation(format!(
                "absent block {}/{} in image aggregation",
                b.sample_id, b.source_id
            )));
        }
        for (a, v) in acc.iter_mut().zip(&b.vector) {
            *a += v;
        }
    }
    let n = blocks.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}
