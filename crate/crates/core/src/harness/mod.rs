//! Subset enumeration, the resumable training matrix, and report builders.

pub mod config;
pub mod matrix;
pub mod reports;
pub mod store;
pub mod subsets;
pub mod sweep;

pub use matrix::{matrix_jobs, run_matrix, MatrixOptions, MatrixSummary, MatrixTask};
pub use reports::{
    delta_report, grid_report, modality_count_footer, BaselineKind, DeltaReport, GridCell, GridReport,
};
pub use store::{ExperimentRecord, RecordKey, ResultsStore, RunStatus};
pub use subsets::{enumerate_subsets, included_sources, modality_count_totals, SubsetDescriptor};
pub use sweep::{missingness_sweep, SweepRow, SweepTable};
