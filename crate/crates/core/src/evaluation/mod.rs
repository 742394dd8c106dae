//! AUROC and ROC curves, patient-grouped splitting, and the repeated
//! train/test protocol.

pub mod auroc;
pub mod protocol;
pub mod split;

pub use auroc::{auroc, roc_curve, trapezoid_area, write_roc_csv, RocPoint};
pub use protocol::{
    mean_sd, repeat_seed, repeated_experiment, repeated_experiment_detailed, run_repeat, Dataset,
    FittedModel, LearnerConfig, LearnerKind, MetricSummary, RepeatOutcome,
};
pub use split::{group_indices, group_kfold, group_stratified_split, SplitPlan};
