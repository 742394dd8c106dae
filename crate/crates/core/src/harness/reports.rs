use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::store::ExperimentRecord;
use crate::error::{Error, Result};
use crate::evaluation::mean_sd;

/// Mean AUROC of one subset over its successful repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSummary {
    pub subset_id: String,
    pub mask: u64,
    pub n_sources: usize,
    pub n_modalities: usize,
    pub mean: f64,
    pub sd: f64,
    pub repeats: usize,
}

/// Per-subset summaries for a task, keyed by mask. Failure rows are ignored.
pub fn subset_summaries(records: &[ExperimentRecord], task_id: &str) -> BTreeMap<u64, SubsetSummary> {
    let mut by_mask: BTreeMap<u64, (&ExperimentRecord, Vec<(usize, f64)>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task_id == task_id && r.is_ok()) {
        let auc = r.test_auroc.expect("ok rows carry an AUROC");
        by_mask.entry(r.mask).or_insert_with(|| (r, Vec::new())).1.push((r.repeat, auc));
    }
    by_mask
        .into_iter()
        .map(|(mask, (first, mut values))| {
            values.sort_by_key(|&(rep, _)| rep);
            let aucs: Vec<f64> = values.into_iter().map(|(_, a)| a).collect();
            let (mean, sd) = mean_sd(&aucs);
            let s = SubsetSummary {
                subset_id: first.subset_id.clone(),
                mask,
                n_sources: first.n_sources,
                n_modalities: first.n_modalities,
                mean,
                sd,
                repeats: aucs.len(),
            };
            (mask, s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub n_modalities: usize,
    pub n_sources: usize,
    pub n_subsets: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Cells over (n_modalities, n_sources); combinations without subsets are absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub task_id: String,
    pub max_modalities: usize,
    pub max_sources: usize,
    pub cells: BTreeMap<(usize, usize), GridCell>,
}

impl GridReport {
    pub fn cell(&self, n_modalities: usize, n_sources: usize) -> Option<&GridCell> {
        self.cells.get(&(n_modalities, n_sources))
    }

    /// Rows are modality counts, columns source counts, cells `mean|sd`.
    pub fn to_csv(&self) -> String {
        grid_csv(self, |c| format!("{:.6}|{:.6}", c.mean, c.sd))
    }

    pub fn to_long_csv(&self) -> String {
        long_csv(&self.task_id, self.cells.values())
    }
}

fn grid_csv(g: &GridReport, fmt: impl Fn(&GridCell) -> String) -> String {
    let mut out = String::from("n_modalities");
    for s in 1..=g.max_sources {
        write!(out, ",s{s}").unwrap();
    }
    out.push('\n');
    for m in 1..=g.max_modalities {
        write!(out, "{m}").unwrap();
        for s in 1..=g.max_sources {
            out.push(',');
            if let Some(c) = g.cell(m, s) {
                out.push_str(&fmt(c));
            }
        }
        out.push('\n');
    }
    out
}

fn long_csv<'a>(task_id: &str, cells: impl Iterator<Item = &'a GridCell>) -> String {
    let mut out = String::from("task_id,n_modalities,n_sources,n_subsets,mean,sd\n");
    for c in cells {
        writeln!(
            out,
            "{task_id},{},{},{},{},{}",
            c.n_modalities, c.n_sources, c.n_subsets, c.mean, c.sd
        )
        .unwrap();
    }
    out
}

/// Groups (value, per-repeat SD) pairs into cells. A cell's SD is the spread
/// across its subsets, or the repeat SD when the cell holds a single subset.
fn build_cells(items: impl Iterator<Item = ((usize, usize), f64, f64)>) -> BTreeMap<(usize, usize), GridCell> {
    let mut groups: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for (key, value, repeat_sd) in items {
        groups.entry(key).or_default().push((value, repeat_sd));
    }
    groups
        .into_iter()
        .map(|((m, s), vals)| {
            let means: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let (mean, spread) = mean_sd(&means);
            let sd = if vals.len() == 1 { vals[0].1 } else { spread };
            let cell = GridCell {
                n_modalities: m,
                n_sources: s,
                n_subsets: vals.len(),
                mean,
                sd,
            };
            ((m, s), cell)
        })
        .collect()
}

pub fn grid_report(records: &[ExperimentRecord], task_id: &str) -> Result<GridReport> {
    let subsets = subset_summaries(records, task_id);
    if subsets.is_empty() {
        return Err(Error::EmptyStore(task_id.to_string()));
    }
    let cells = build_cells(
        subsets
            .values()
            .map(|s| ((s.n_modalities, s.n_sources), s.mean, s.sd)),
    );
    Ok(GridReport {
        task_id: task_id.to_string(),
        max_modalities: subsets.values().map(|s| s.n_modalities).max().unwrap_or(0),
        max_sources: subsets.values().map(|s| s.n_sources).max().unwrap_or(0),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Mean over the single-source models of the subset's own sources.
    #[default]
    Constituent,
    /// Mean over every single-source model of the task.
    AllSingles,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Constituent => "constituent",
            BaselineKind::AllSingles => "all_singles",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetDelta {
    pub subset_id: String,
    pub mask: u64,
    pub n_sources: usize,
    pub n_modalities: usize,
    pub auroc: f64,
    pub baseline: f64,
    pub delta_pct: f64,
}

/// Percent AUROC change of multi-source subsets against single-source baselines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub task_id: String,
    pub baseline: BaselineKind,
    pub subsets: Vec<SubsetDelta>,
    pub grid: GridReport,
}

impl DeltaReport {
    /// Same layout as the AUROC grid; cells hold mean Δ%.
    pub fn to_csv(&self) -> String {
        grid_csv(&self.grid, |c| format!("{:.4}", c.mean))
    }

    pub fn to_long_csv(&self) -> String {
        long_csv(&self.task_id, self.grid.cells.values())
    }
}

pub fn percent_change(value: f64, baseline: f64) -> f64 {
    100.0 * (value - baseline) / baseline
}

pub fn delta_report(records: &[ExperimentRecord], task_id: &str, baseline: BaselineKind) -> Result<DeltaReport> {
    let subsets = subset_summaries(records, task_id);
    if subsets.is_empty() {
        return Err(Error::EmptyStore(task_id.to_string()));
    }
    let singles: BTreeMap<u32, f64> = subsets
        .values()
        .filter(|s| s.mask.count_ones() == 1)
        .map(|s| (s.mask.trailing_zeros(), s.mean))
        .collect();
    if singles.is_empty() {
        return Err(Error::MissingBaseline(format!("task {task_id} has no single-source results")));
    }
    let all_mean = singles.values().sum::<f64>() / singles.len() as f64;

    let mut deltas = Vec::new();
    for s in subsets.values().filter(|s| s.mask.count_ones() >= 2) {
        let base = match baseline {
            BaselineKind::AllSingles => all_mean,
            BaselineKind::Constituent => {
                let bits: Vec<u32> = (0..64).filter(|b| s.mask >> b & 1 == 1).collect();
                let missing: Vec<u32> = bits.iter().copied().filter(|b| !singles.contains_key(b)).collect();
                if !missing.is_empty() {
                    return Err(Error::MissingBaseline(format!(
                        "subset {} lacks single-source results for catalog positions {missing:?}",
                        s.subset_id
                    )));
                }
                bits.iter().map(|b| singles[b]).sum::<f64>() / bits.len() as f64
            }
        };
        deltas.push(SubsetDelta {
            subset_id: s.subset_id.clone(),
            mask: s.mask,
            n_sources: s.n_sources,
            n_modalities: s.n_modalities,
            auroc: s.mean,
            baseline: base,
            delta_pct: percent_change(s.mean, base),
        });
    }
    let cells = build_cells(
        deltas
            .iter()
            .map(|d| ((d.n_modalities, d.n_sources), d.delta_pct, 0.0)),
    );
    let grid = GridReport {
        task_id: task_id.to_string(),
        max_modalities: subsets.values().map(|s| s.n_modalities).max().unwrap_or(0),
        max_sources: subsets.values().map(|s| s.n_sources).max().unwrap_or(0),
        cells,
    };
    Ok(DeltaReport {
        task_id: task_id.to_string(),
        baseline,
        subsets: deltas,
        grid,
    })
}

/// Footer lines listing how many subsets cover each modality count.
pub fn modality_count_footer(records: &[ExperimentRecord], task_id: &str) -> String {
    let subsets = subset_summaries(records, task_id);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in subsets.values() {
        *counts.entry(s.n_modalities).or_insert(0) += 1;
    }
    let total: usize = counts.values().sum();
    let listed: Vec<String> = counts.iter().map(|(m, n)| format!("{m}M={n}")).collect();
    let mut out = format!(
        "subsets per modality count (exact cover): {} (total {total})\n",
        listed.join(", ")
    );
    out.push_str(
        "note: counts follow exact modality cover and always sum to the subset total. \
         With 11 sources in modality groups of 1, 3, 3 and 4 this gives 30, 288, 994 and 735. \
         The tally 52, 392, 972, 630 sums to 2046 and cannot arise from 2047 subsets.\n",
    );
    out
}
