use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{auroc, mean_sd, run_repeat, Dataset, LearnerConfig};
use crate::featurization::block_ranges;
use crate::record_store::catalog::SourceSet;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rate: f64,
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub task_id: String,
    pub subset_id: String,
    /// Unmasked test AUROC per repeat, as produced by the matrix.
    pub baseline: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task_id,subset_id,rate,mean_auroc,sd_auroc\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.task_id, self.subset_id, r.rate, r.mean, r.sd
            ));
        }
        out
    }
}

/// Re-scores each repeat's test split with source blocks zeroed at random.
///
/// Models are retrained with the matrix's seeds, so they are the ones the
/// store describes. Each (test sample, source) pair gets one uniform draw per
/// repeat and is masked when the draw falls below the rate, so masks are
/// nested across rates. Masking happens in raw feature space, before the
/// training-split normalizer is applied.
pub fn missingness_sweep(
    data: &Dataset,
    set: SourceSet,
    learner: &LearnerConfig,
    repeats: usize,
    base_seed: u64,
    rates: &[f64],
    mask_seed: u64,
) -> Result<SweepTable> {
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Domain(format!("masking rate {r} outside [0, 1]")));
    }
    let ranges = block_ranges(data.store.catalog(), set);
    let mut per_rate = vec![Vec::with_capacity(repeats); rates.len()];
    let mut baseline = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let out = run_repeat(data, set, learner, repeat, base_seed)?;
        baseline.push(out.test_auroc);
        let raw = data.matrix(&out.split.test, set);
        let mut draw_rng = rng::rng(rng::derive(mask_seed ^ rng::derive(base_seed, repeat as u64), rng::STREAM_MASK));
        let draws: Vec<f64> = (0..raw.rows() * ranges.len()).map(|_| draw_rng.gen::<f64>()).collect();
        for (k, &rate) in rates.iter().enumerate() {
            let mut x = raw.clone();
            for i in 0..x.rows() {
                let row = x.row_mut(i);
                for (b, (_, range)) in ranges.iter().enumerate() {
                    if draws[i * ranges.len() + b] < rate {
                        row[range.clone()].fill(0.0);
                    }
                }
            }
            out.normalizer.apply_matrix(&mut x)?;
            let scores = out.model.predict_scores(&x)?;
            per_rate[k].push(auroc(&scores, &out.test_labels)?);
        }
    }
    let rows = rates
        .iter()
        .zip(per_rate)
        .map(|(&rate, per_repeat)| {
            let (mean, sd) = mean_sd(&per_repeat);
            SweepRow {
                rate,
                per_repeat,
                mean,
                sd,
            }
        })
        .collect();
    Ok(SweepTable {
        task_id: data.task_id.clone(),
        subset_id: set.canonical_id(data.store.catalog()),
        baseline,
        rows,
    })
}
