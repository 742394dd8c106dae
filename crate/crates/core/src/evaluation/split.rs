//! Patient-grouped, class-stratified partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record_store::LabeledSample;
use crate::rng;

/// Allowed deviation of the test fraction and the test positive rate.
pub const SPLIT_TOLERANCE: f64 = 0.05;
const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Indices into the sample list the plan was built from, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl SplitPlan {
    pub fn train_ids<'a>(&self, samples: &'a [LabeledSample]) -> Vec<&'a str> {
        self.train.iter().map(|&i| samples[i].sample_id.as_str()).collect()
    }

    pub fn test_ids<'a>(&self, samples: &'a [LabeledSample]) -> Vec<&'a str> {
        self.test.iter().map(|&i| samples[i].sample_id.as_str()).collect()
    }
}

struct Group {
    members: Vec<usize>,
    pos: usize,
    neg: usize,
}

fn groups_of<K: Ord>(ids: impl Iterator<Item = K>, labels: &[u8]) -> Vec<Group> {
    let mut by_id: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, id) in ids.enumerate() {
        by_id.entry(id).or_default().push(i);
    }
    by_id
        .into_values()
        .map(|members| {
            let pos = members.iter().filter(|&&i| labels[i] == 1).count();
            Group {
                neg: members.len() - pos,
                pos,
                members,
            }
        })
        .collect()
}

/// Dense group index per sample (patients numbered in sorted id order).
pub fn group_indices(samples: &[LabeledSample]) -> Vec<u32> {
    let mut ids: Vec<&str> = samples.iter().map(|s| s.patient_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    samples
        .iter()
        .map(|s| ids.binary_search(&s.patient_id.as_str()).unwrap() as u32)
        .collect()
}

/// Greedy seeded assignment of whole patients to the test side, filling
/// per-class quotas of `test_fraction`. Retries with derived seeds until the
/// test fraction and positive rate are both within 5 points of target.
pub fn group_stratified_split(
    samples: &[LabeledSample],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let groups = groups_of(samples.iter().map(|s| s.patient_id.as_str()), &labels);
    let pos_patients = groups.iter().filter(|g| g.pos > 0).count();
    let neg_patients = groups.iter().filter(|g| g.neg > 0).count();
    if pos_patients < 2 || neg_patients < 2 {
        return Err(Error::InfeasibleSplit(format!(
            "need at least 2 patients per class, have {pos_patients} with positives and {neg_patients} with negatives"
        )));
    }
    let n = samples.len() as f64;
    let npos: usize = groups.iter().map(|g| g.pos).sum();
    let nneg: usize = groups.iter().map(|g| g.neg).sum();
    let rate = npos as f64 / n;
    let quota_pos = ((test_fraction * npos as f64).round() as usize).max(1);
    let quota_neg = ((test_fraction * nneg as f64).round() as usize).max(1);

    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 {
            seed
        } else {
            rng::derive(seed, rng::STREAM_SPLIT_RETRY + (attempt << 8))
        };
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng::rng(s));
        let (mut tp, mut tn) = (0, 0);
        let mut in_test = vec![false; groups.len()];
        for &g in &order {
            let grp = &groups[g];
            if tp + grp.pos <= quota_pos && tn + grp.neg <= quota_neg {
                tp += grp.pos;
                tn += grp.neg;
                in_test[g] = true;
            }
        }
        let test_n = (tp + tn) as f64;
        let ok = tp > 0
            && tn > 0
            && tp < npos
            && tn < nneg
            && (test_n / n - test_fraction).abs() <= SPLIT_TOLERANCE
            && (tp as f64 / test_n - rate).abs() <= SPLIT_TOLERANCE;
        if ok {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (g, grp) in groups.iter().enumerate() {
                let side = if in_test[g] { &mut test } else { &mut train };
                side.extend_from_slice(&grp.members);
            }
            train.sort_unstable();
            test.sort_unstable();
            return Ok(SplitPlan {
                train,
                test,
                seed,
                test_fraction,
            });
        }
    }
    Err(Error::InfeasibleSplit(format!(
        "no split within tolerance after {MAX_ATTEMPTS} attempts"
    )))
}

/// Assigns each sample a fold in `0..k`, keeping groups whole and spreading
/// both classes evenly: groups are visited in seeded random order and each
/// joins the fold whose class-normalized load stays lowest.
pub fn group_kfold(groups: &[u32], labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Validation(format!("need k >= 2 folds, got {k}")));
    }
    let grouped = groups_of(groups.iter().copied(), labels);
    let npos: usize = grouped.iter().map(|g| g.pos).sum();
    let nneg: usize = grouped.iter().map(|g| g.neg).sum();
    let e_pos = (npos as f64 / k as f64).max(1.0);
    let e_neg = (nneg as f64 / k as f64).max(1.0);

    let mut order: Vec<usize> = (0..grouped.len()).collect();
    order.shuffle(&mut rng::rng(seed));
    let mut load = vec![(0usize, 0usize); k];
    let mut fold_of = vec![0usize; labels.len()];
    for &g in &order {
        let grp = &grouped[g];
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for (f, &(p, q)) in load.iter().enumerate() {
            let cost = (p + grp.pos) as f64 / e_pos + (q + grp.neg) as f64 / e_neg;
            if cost < best_cost {
                best_cost = cost;
                best = f;
            }
        }
        load[best].0 += grp.pos;
        load[best].1 += grp.neg;
        for &i in &grp.members {
            fold_of[i] = best;
        }
    }
    for (f, &(p, q)) in load.iter().enumerate() {
        if p == 0 || q == 0 {
            return Err(Error::FoldDegeneracy {
                fold: f,
                side: "validation",
            });
        }
        if p == npos || q == nneg {
            return Err(Error::FoldDegeneracy {
                fold: f,
                side: "training",
            });
        }
    }
    Ok(fold_of)
}
