use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{0}")]
    Domain(String),

    #[error("missing outcome for sample {sample_id} ({task})")]
    MissingOutcome { sample_id: String, task: String },

    #[error("dimension mismatch for sample {sample_id}, source {source_id}: expected {expected}, got {actual}")]
    Dimension {
        sample_id: String,
        source_id: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("duplicate sample {sample_id} for source {source_id}")]
    DuplicateSample { sample_id: String, source_id: String },

    #[error("unknown source {0:?}")]
    UnknownSource(String),

    #[error("timestamps decrease at index {index}")]
    Unsorted { index: usize },

    #[error("empty input: {0}")]
    EmptySet(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("logistic regression did not converge after {iters} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iters: usize, grad_norm: f64 },

    #[error("fold {fold} lacks a class in its {side} part")]
    FoldDegeneracy { fold: usize, side: &'static str },

    #[error("AUROC needs both classes (got {positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("repeat {repeat}: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no records for task {0}")]
    EmptyStore(String),

    #[error("missing single-source baseline for {0}")]
    MissingBaseline(String),

    #[error("incomplete matrix for task {task}: missing {}", missing.join(", "))]
    IncompleteMatrix { task: String, missing: Vec<String> },

    #[error("exact Shapley supports at most {max} players, got {players}")]
    TooManyPlayers { players: usize, max: usize },

    #[error("invalid cohort spec: {0}")]
    Spec(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by bad inputs rather than by I/O or training.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Dimension { .. }
                | Error::NonFinite(_)
                | Error::DuplicateSample { .. }
                | Error::UnknownSource(_)
                | Error::MissingOutcome { .. }
                | Error::IncompleteMatrix { .. }
                | Error::Spec(_)
        )
    }
}
