use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::store::{ExperimentRecord, RecordKey, ResultsStore, RunStatus};
use super::subsets::{enumerate_subsets, SubsetDescriptor};
use crate::error::{Error, Result};
use crate::evaluation::{repeat_seed, run_repeat, Dataset, LearnerConfig};

/// One task of the matrix: a dataset plus the sources left out of its subsets.
#[derive(Debug, Clone, Copy)]
pub struct MatrixTask<'a> {
    pub dataset: &'a Dataset,
    pub excluded: &'a [String],
}

#[derive(Debug, Clone)]
pub struct MatrixOptions {
    pub repeats: usize,
    pub base_seed: u64,
    pub learner: LearnerConfig,
    pub parallelism: usize,
    /// Stop after this many new jobs. Used to emulate an interrupted run.
    pub max_new_jobs: Option<usize>,
}

impl MatrixOptions {
    pub fn new(repeats: usize, base_seed: u64, learner: LearnerConfig, parallelism: usize) -> Self {
        MatrixOptions {
            repeats,
            base_seed,
            learner,
            parallelism,
            max_new_jobs: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatrixSummary {
    pub expected: usize,
    pub skipped: usize,
    pub trained: usize,
    pub failed: usize,
    /// Failure rows for these tasks in the store after the run, old and new.
    pub failures_in_store: usize,
    /// Jobs left pending because of `max_new_jobs`.
    pub remaining: usize,
}

impl MatrixSummary {
    pub fn is_complete(&self) -> bool {
        self.remaining == 0
    }
}

struct Job<'a> {
    task: MatrixTask<'a>,
    subset: SubsetDescriptor,
    repeat: usize,
}

/// Every (task, subset, repeat) job, in key order.
pub fn matrix_jobs(tasks: &[MatrixTask<'_>], repeats: usize) -> Result<Vec<(String, SubsetDescriptor, usize)>> {
    let mut out = Vec::new();
    for t in tasks {
        for s in enumerate_subsets(t.dataset.store.catalog(), t.excluded)? {
            for r in 0..repeats {
                out.push((t.dataset.task_id.clone(), s.clone(), r));
            }
        }
    }
    Ok(out)
}

/// Runs every missing (task, subset, repeat) job and seals the store.
pub fn run_matrix(tasks: &[MatrixTask<'_>], options: &MatrixOptions, results_path: &Path) -> Result<MatrixSummary> {
    if options.repeats == 0 {
        return Err(Error::Validation("repeats must be at least 1".into()));
    }
    if options.parallelism == 0 {
        return Err(Error::Validation("parallelism must be at least 1".into()));
    }
    let mut ids: Vec<&str> = tasks.iter().map(|t| t.dataset.task_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("task ids must be unique".into()));
    }

    let store = ResultsStore::open(results_path)?;
    let mut jobs = Vec::new();
    let mut summary = MatrixSummary::default();
    for &task in tasks {
        for subset in enumerate_subsets(task.dataset.store.catalog(), task.excluded)? {
            for repeat in 0..options.repeats {
                summary.expected += 1;
                let key = RecordKey {
                    task_id: task.dataset.task_id.clone(),
                    mask: subset.mask.0,
                    repeat,
                };
                if store.contains(&key) {
                    summary.skipped += 1;
                } else {
                    jobs.push(Job {
                        task,
                        subset: subset.clone(),
                        repeat,
                    });
                }
            }
        }
    }
    jobs.sort_by(|a, b| {
        (&a.task.dataset.task_id, a.subset.mask, a.repeat).cmp(&(&b.task.dataset.task_id, b.subset.mask, b.repeat))
    });
    if let Some(cap) = options.max_new_jobs {
        if jobs.len() > cap {
            summary.remaining = jobs.len() - cap;
            jobs.truncate(cap);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let shared = Mutex::new((store, 0usize, 0usize, None::<Error>));
    pool.install(|| {
        jobs.par_iter().for_each(|job| {
            let start = Instant::now();
            let record = run_job(job, options);
            let elapsed = start.elapsed().as_secs_f64();
            let mut guard = shared.lock().expect("store lock");
            let (store, trained, failed, first_err) = &mut *guard;
            if first_err.is_some() {
                return;
            }
            let ok = record.is_ok();
            match store.append(record, elapsed) {
                Ok(()) if ok => *trained += 1,
                Ok(()) => *failed += 1,
                Err(e) => *first_err = Some(e),
            }
        })
    });
    let (mut store, trained, failed, first_err) = shared.into_inner().expect("store lock");
    if let Some(e) = first_err {
        return Err(e);
    }
    store.seal()?;
    summary.trained = trained;
    summary.failed = failed;
    summary.failures_in_store = store
        .records()
        .filter(|r| !r.is_ok() && ids.binary_search(&r.task_id.as_str()).is_ok())
        .count();
    Ok(summary)
}

fn run_job(job: &Job<'_>, options: &MatrixOptions) -> ExperimentRecord {
    let data = job.task.dataset;
    let mut record = ExperimentRecord {
        task_id: data.task_id.clone(),
        subset_id: job.subset.subset_id.clone(),
        mask: job.subset.mask.0,
        n_sources: job.subset.n_sources,
        n_modalities: job.subset.n_modalities,
        repeat: job.repeat,
        seed: repeat_seed(options.base_seed, job.repeat),
        status: RunStatus::Ok,
        hyperparams: None,
        test_auroc: None,
        n_train: 0,
        n_test: 0,
        error: None,
    };
    match run_repeat(data, job.subset.mask, &options.learner, job.repeat, options.base_seed) {
        Ok(out) => {
            record.hyperparams = out.hyperparams;
            record.test_auroc = Some(out.test_auroc);
            record.n_train = out.split.train.len();
            record.n_test = out.split.test.len();
        }
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record
}
