//! Repeated split → normalize → grid-search → refit → test protocol.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auroc::auroc;
use super::split::{group_indices, group_stratified_split, SplitPlan};
use crate::error::{Error, Result};
use crate::featurization::{fusion_matrix, Normalizer};
use crate::learner::{
    default_grid, grid_search_cv, train_gbdt, train_logreg, GbdtHyperparams, LogisticModel,
    TrainedEnsemble,
};
use crate::matrix::Matrix;
use crate::record_store::catalog::SourceSet;
use crate::record_store::{BlockStore, LabeledSample};
use crate::rng;

/// Labeled samples of one task together with their embedding blocks.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub task_id: String,
    pub store: BlockStore,
    pub samples: Vec<LabeledSample>,
    labels: Vec<u8>,
    groups: Vec<u32>,
}

impl Dataset {
    pub fn new(task_id: &str, store: BlockStore, samples: Vec<LabeledSample>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !store.contains_sample(&s.sample_id)) {
            return Err(Error::Validation(format!(
                "sample {} has no embedding blocks at all",
                s.sample_id
            )));
        }
        let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == labels.len() {
            return Err(Error::DegenerateData(format!(
                "task {task_id}: {pos} positives among {} samples",
                labels.len()
            )));
        }
        let groups = group_indices(&samples);
        Ok(Dataset {
            task_id: task_id.to_string(),
            store,
            samples,
            labels,
            groups,
        })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[u32] {
        &self.groups
    }

    /// Raw (unnormalized) fusion rows for the given sample indices.
    pub fn matrix(&self, rows: &[usize], set: SourceSet) -> Matrix {
        let ids: Vec<&str> = rows.iter().map(|&i| self.samples[i].sample_id.as_str()).collect();
        fusion_matrix(&self.store, &ids, set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    Gbdt,
    Logistic { l2: f64, max_iters: usize, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub grid: Vec<GbdtHyperparams>,
    pub folds: usize,
    pub test_fraction: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::Gbdt,
            grid: default_grid(),
            folds: 5,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Gbdt(TrainedEnsemble),
    Logistic(LogisticModel),
}

impl FittedModel {
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            FittedModel::Gbdt(m) => m.predict_scores(x),
            FittedModel::Logistic(m) => m.predict_scores(x),
        }
    }
}

/// Everything produced by one repeat of the protocol.
#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub split: SplitPlan,
    pub normalizer: Normalizer,
    pub hyperparams: Option<GbdtHyperparams>,
    pub model: FittedModel,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<u8>,
    pub test_auroc: f64,
}

/// Split seed of a repeat.
pub fn repeat_seed(base_seed: u64, repeat: usize) -> u64 {
    base_seed.wrapping_add(repeat as u64)
}

pub fn run_repeat(
    data: &Dataset,
    set: SourceSet,
    config: &LearnerConfig,
    repeat: usize,
    base_seed: u64,
) -> Result<RepeatOutcome> {
    run_repeat_inner(data, set, config, repeat, base_seed).map_err(|e| Error::Repeat {
        repeat,
        source: Box::new(e),
    })
}

fn run_repeat_inner(
    data: &Dataset,
    set: SourceSet,
    config: &LearnerConfig,
    repeat: usize,
    base_seed: u64,
) -> Result<RepeatOutcome> {
    if set.is_empty() {
        return Err(Error::Validation("empty source set".into()));
    }
    let seed = repeat_seed(base_seed, repeat);
    let split = group_stratified_split(&data.samples, config.test_fraction, seed)?;

    let mut x_train = data.matrix(&split.train, set);
    let normalizer = Normalizer::fit(&x_train, &format!("{}/repeat-{repeat}/train", data.task_id))?;
    normalizer.apply_matrix(&mut x_train)?;
    let y_train: Vec<u8> = split.train.iter().map(|&i| data.labels[i]).collect();
    let g_train: Vec<u32> = split.train.iter().map(|&i| data.groups[i]).collect();

    let (model, hyperparams) = match &config.kind {
        LearnerKind::Gbdt => {
            let cv_seed = rng::derive(seed, rng::STREAM_CV);
            let best = grid_search_cv(&x_train, &y_train, &g_train, &config.grid, config.folds, cv_seed)?;
            let model = train_gbdt(&x_train, &y_train, &best.best, seed)?;
            (FittedModel::Gbdt(model), Some(best.best))
        }
        LearnerKind::Logistic { l2, max_iters, tol } => {
            let model = train_logreg(&x_train, &y_train, *l2, *max_iters, *tol)?;
            (FittedModel::Logistic(model), None)
        }
    };
    drop(x_train);

    let mut x_test = data.matrix(&split.test, set);
    normalizer.apply_matrix(&mut x_test)?;
    let test_labels: Vec<u8> = split.test.iter().map(|&i| data.labels[i]).collect();
    let test_scores = model.predict_scores(&x_test)?;
    let test_auroc = auroc(&test_scores, &test_labels)?;
    Ok(RepeatOutcome {
        repeat,
        seed,
        split,
        normalizer,
        hyperparams,
        model,
        test_scores,
        test_labels,
        test_auroc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean_auroc: f64,
    pub sd_auroc: f64,
    pub per_repeat: Vec<f64>,
}

impl MetricSummary {
    /// Mean and sample SD (n − 1 divisor; 0 for a single repeat).
    pub fn from_values(per_repeat: Vec<f64>) -> Self {
        let (mean_auroc, sd_auroc) = mean_sd(&per_repeat);
        MetricSummary {
            mean_auroc,
            sd_auroc,
            per_repeat,
        }
    }
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn repeated_experiment_detailed(
    data: &Dataset,
    set: SourceSet,
    config: &LearnerConfig,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<RepeatOutcome>> {
    (0..repeats)
        .into_par_iter()
        .map(|r| run_repeat(data, set, config, r, base_seed))
        .collect()
}

pub fn repeated_experiment(
    data: &Dataset,
    set: SourceSet,
    config: &LearnerConfig,
    repeats: usize,
    base_seed: u64,
) -> Result<MetricSummary> {
    let outcomes = repeated_experiment_detailed(data, set, config, repeats, base_seed)?;
    Ok(MetricSummary::from_values(
        outcomes.iter().map(|o| o.test_auroc).collect(),
    ))
}
