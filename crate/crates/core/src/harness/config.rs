//! TOML run configuration shared by the command-line subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::reports::BaselineKind;
use crate::error::{Error, Result};
use crate::evaluation::{LearnerConfig, LearnerKind};
use crate::learner::{default_grid, expand_grid};
use crate::synthetic::CohortSpec;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "one")]
    pub parallelism: usize,
    pub paths: PathsConfig,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub shapley: ShapleySection,
    #[serde(default)]
    pub synth: Option<SynthSection>,
}

/// File locations. Relative paths resolve against the config file's directory.
///
/// The data directory holds `samples.csv`, `outcomes.csv`, `records.jsonl`
/// and a `blocks/` directory of embedding-block files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub catalog: PathBuf,
    pub data: PathBuf,
    pub results: PathBuf,
    pub reports: PathBuf,
}

impl PathsConfig {
    pub fn samples(&self) -> PathBuf {
        self.data.join("samples.csv")
    }

    pub fn outcomes(&self) -> PathBuf {
        self.data.join("outcomes.csv")
    }

    pub fn records(&self) -> PathBuf {
        self.data.join("records.jsonl")
    }

    pub fn blocks(&self) -> PathBuf {
        self.data.join("blocks")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub id: String,
    #[serde(default)]
    pub excluded_sources: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnerName {
    #[default]
    Gbdt,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub kind: LearnerName,
    pub folds: usize,
    pub test_fraction: f64,
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        LearnerSection {
            kind: LearnerName::Gbdt,
            folds: 5,
            test_fraction: 0.2,
            l2: 1.0,
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub max_depth: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub delta_baseline: BaselineKind,
    /// Subsets whose ROC curves are exported; the full included set when empty.
    pub roc_subsets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub rates: Vec<f64>,
    pub seed: u64,
    /// Subset to sweep; the full included set when absent.
    pub subset: Option<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            rates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            seed: 0,
            subset: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ShapleySection {
    /// Attribute each repeat separately and average, instead of averaging AUROCs first.
    pub per_repeat: bool,
}

/// Either a named preset or a complete cohort spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SynthSection {
    Preset {
        preset: String,
        #[serde(default)]
        n_patients: Option<usize>,
    },
    Spec(CohortSpec),
}

impl SynthSection {
    pub fn cohort_spec(&self, seed: u64) -> Result<CohortSpec> {
        match self {
            SynthSection::Spec(s) => Ok(s.clone()),
            SynthSection::Preset { preset, n_patients } => {
                let mut spec = match preset.as_str() {
                    "desk" => CohortSpec::desk(seed),
                    "desk_redundant" => CohortSpec::desk_redundant(seed),
                    other => return Err(Error::Validation(format!("unknown synth preset {other:?}"))),
                };
                if let Some(n) = n_patients {
                    spec.n_patients = *n;
                }
                Ok(spec)
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.paths.catalog);
        resolve(&mut cfg.paths.data);
        resolve(&mut cfg.paths.results);
        resolve(&mut cfg.paths.reports);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, dir)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Validation("repeats must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Validation("parallelism must be at least 1".into()));
        }
        let l = &self.learner;
        if l.folds < 2 {
            return Err(Error::Validation("learner.folds must be at least 2".into()));
        }
        if !(l.test_fraction > 0.0 && l.test_fraction < 1.0) {
            return Err(Error::Validation("learner.test_fraction must be in (0, 1)".into()));
        }
        let mut ids: Vec<&str> = self.tasks.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate task id".into()));
        }
        for hp in self.learner_config().grid {
            hp.validate()?;
        }
        if let Some(r) = self.sweep.rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Validation(format!("sweep rate {r} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            kind: match l.kind {
                LearnerName::Gbdt => LearnerKind::Gbdt,
                LearnerName::Logistic => LearnerKind::Logistic {
                    l2: l.l2,
                    max_iters: l.max_iters,
                    tol: l.tol,
                },
            },
            grid: match &self.grid {
                Some(g) => expand_grid(&g.max_depth, &g.n_estimators, &g.learning_rate),
                None => default_grid(),
            },
            folds: l.folds,
            test_fraction: l.test_fraction,
        }
    }

    /// Tasks selected by an optional id filter.
    pub fn selected_tasks(&self, filter: Option<&str>) -> Result<Vec<&TaskConfig>> {
        let tasks: Vec<&TaskConfig> = self
            .tasks
            .iter()
            .filter(|t| filter.map_or(true, |f| f == t.id))
            .collect();
        if tasks.is_empty() {
            return Err(Error::Validation(match filter {
                Some(f) => format!("no task named {f:?} in config"),
                None => "config lists no tasks".into(),
            }));
        }
        Ok(tasks)
    }
}
