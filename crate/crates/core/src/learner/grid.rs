use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbdt::{train_gbdt, GbdtHyperparams};
use crate::error::{Error, Result};
use crate::evaluation::{auroc, split::group_kfold};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GbdtHyperparams,
    pub best_index: usize,
    /// Mean validation AUROC per grid point, in grid order.
    pub mean_scores: Vec<f64>,
}

/// k-fold cross-validated grid search with patient-grouped folds. The grid
/// point with the highest mean validation AUROC wins; ties go to the earlier
/// point.
pub fn grid_search_cv(
    x: &Matrix,
    y: &[u8],
    groups: &[u32],
    grid: &[GbdtHyperparams],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Validation("empty hyperparameter grid".into()));
    }
    if groups.len() != y.len() || x.rows() != y.len() {
        return Err(Error::Validation("x, y and groups must have equal length".into()));
    }
    let folds = group_kfold(groups, y, k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| (0..y.len()).partition(|&i| folds[i] != f))
        .collect();
    let data: Vec<(Matrix, Vec<u8>, Matrix, Vec<u8>)> = splits
        .iter()
        .map(|(tr, va)| {
            (
                x.select_rows(tr),
                tr.iter().map(|&i| y[i]).collect(),
                x.select_rows(va),
                va.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (xt, yt, xv, yv) = &data[f];
            let model = train_gbdt(xt, yt, &grid[g], seed)?;
            auroc(&model.predict_scores(xv)?, yv)
        })
        .collect::<Result<_>>()?;

    let mean_scores: Vec<f64> = scores
        .chunks(k)
        .map(|c| c.iter().sum::<f64>() / k as f64)
        .collect();
    let mut best_index = 0;
    for (i, &s) in mean_scores.iter().enumerate() {
        if s > mean_scores[best_index] {
            best_index = i;
        }
    }
    Ok(GridSearchResult {
        best: grid[best_index],
        best_index,
        mean_scores,
    })
}
