//! Binary classifiers: gradient-boosted trees (primary) and logistic
//! regression (baseline), plus cross-validated grid search.

pub mod gbdt;
pub mod grid;
pub mod logreg;

pub use gbdt::{
    default_grid, expand_grid, log_loss, predict_scores, sigmoid, train_gbdt, train_gbdt_traced,
    GbdtHyperparams, Node, TrainedEnsemble, Tree,
};
pub use grid::{grid_search_cv, GridSearchResult};
pub use logreg::{logreg_objective, train_logreg, LogisticModel};
