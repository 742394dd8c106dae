//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attribution::{
    build_game, build_games_per_repeat, build_modality_game, modality_game_shapley, waterfall_csv,
    ModalityPooling, ShapleyReport,
};
use crate::error::{Error, Result};
use crate::evaluation::{roc_curve, run_repeat, write_roc_csv, Dataset};
use crate::featurization::featurize_records;
use crate::harness::config::{RunConfig, TaskConfig};
use crate::harness::reports::subset_summaries;
use crate::harness::{
    delta_report, enumerate_subsets, grid_report, included_sources, missingness_sweep,
    modality_count_footer, run_matrix, BaselineKind, MatrixOptions, MatrixTask, ResultsStore,
};
use crate::record_store::catalog::SourceSet;
use crate::record_store::labels::{load_sampling_events, write_sampling_events};
use crate::record_store::{
    block_files_in, build_labels, ingest_blocks, load_catalog, load_records, BlockStore,
    OutcomeTable, SourceCatalog, TaskKind,
};
use crate::synthetic::generate_cohort;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides `paths.results`.
pub const RESULTS_ENV: &str = "FUSEBENCH_RESULTS";

#[derive(Debug, Parser)]
#[command(name = "fusebench", version, about = "Multimodal fusion benchmark and attribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Restrict to one task id.
    #[arg(long, global = true)]
    task: Option<String>,

    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort into the data directory.
    Synth,
    /// Validate embedding-block files and write a block index.
    Ingest,
    /// Turn raw patient records into embedding-block files.
    Featurize,
    /// Train and evaluate every (task, subset, repeat) job not yet in the store.
    Matrix,
    /// Write grid, delta and ROC reports.
    Report,
    /// Write Shapley attributions and waterfall tables.
    Shapley,
    /// Re-evaluate full-subset models under random block masking.
    Sweep,
    /// Check config and data without training or writing.
    Validate,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let Some(config_path) = cli.config.clone() else {
        eprintln!("error: missing required flag --config <path>");
        return EXIT_USAGE;
    };
    if cli.parallelism == Some(0) {
        eprintln!("error: --parallelism must be at least 1");
        return EXIT_USAGE;
    }
    match run(&cli, &config_path) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    cfg: RunConfig,
}

fn run(cli: &Cli, config_path: &Path) -> Result<i32> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = std::env::var_os(RESULTS_ENV).filter(|p| !p.is_empty()) {
        cfg.paths.results = PathBuf::from(p);
    }
    let ctx = Context { cli, cfg };
    match cli.command {
        Command::Synth => synth(&ctx),
        Command::Ingest => ingest(&ctx),
        Command::Featurize => featurize(&ctx),
        Command::Matrix => matrix(&ctx),
        Command::Report => report(&ctx),
        Command::Shapley => shapley(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Validate => validate(&ctx),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn to_jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    rows.into_iter()
        .map(|r| serde_json::to_string(&r).expect("row serializes") + "\n")
        .collect()
}

impl Context<'_> {
    fn tasks(&self) -> Result<Vec<&TaskConfig>> {
        self.cfg.selected_tasks(self.cli.task.as_deref())
    }

    fn catalog(&self) -> Result<SourceCatalog> {
        load_catalog(&self.cfg.paths.catalog)
    }

    fn block_store(&self, catalog: &SourceCatalog) -> Result<BlockStore> {
        let dir = self.cfg.paths.blocks();
        let files = block_files_in(&dir)?;
        if files.is_empty() {
            return Err(Error::Validation(format!("no block files in {}", dir.display())));
        }
        ingest_blocks(catalog, &files)
    }

    fn datasets(&self, tasks: &[&TaskConfig]) -> Result<Vec<Dataset>> {
        let catalog = self.catalog()?;
        let store = self.block_store(&catalog)?;
        let events = load_sampling_events(&self.cfg.paths.samples())?;
        let outcomes = OutcomeTable::load(&self.cfg.paths.outcomes())?;
        tasks
            .iter()
            .map(|t| {
                included_sources(&catalog, &t.excluded_sources)?;
                let labels = build_labels(&TaskKind::parse(&t.id), &events, &outcomes)?;
                Dataset::new(&t.id, store.clone(), labels)
            })
            .collect()
    }

    fn records(&self) -> Result<Vec<crate::harness::ExperimentRecord>> {
        ResultsStore::read(&self.cfg.paths.results)
    }

    fn report_dir(&self, task: &str) -> PathBuf {
        self.cfg.paths.reports.join(task)
    }

    fn subset_or_full(&self, catalog: &SourceCatalog, task: &TaskConfig, id: Option<&str>) -> Result<SourceSet> {
        let included = included_sources(catalog, &task.excluded_sources)?;
        match id {
            None => Ok(included),
            Some(id) => {
                let set = SourceSet::parse(catalog, id)?;
                if !set.is_subset_of(included) || set.is_empty() {
                    return Err(Error::Validation(format!(
                        "subset {id} is not a non-empty subset of task {}'s sources",
                        task.id
                    )));
                }
                Ok(set)
            }
        }
    }
}

fn synth(ctx: &Context) -> Result<i32> {
    let section = ctx
        .cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::Validation("config has no [synth] section".into()))?;
    let spec = section.cohort_spec(ctx.cfg.seed)?;
    let catalog = spec.catalog()?;
    let cohort = generate_cohort(&spec, &catalog)?;
    let paths = &ctx.cfg.paths;
    write_file(&paths.catalog, &catalog.to_json())?;
    create_dir(&paths.blocks())?;
    let n = cohort.store.write_jsonl(&paths.blocks().join("cohort.jsonl"), None)?;
    write_sampling_events(&cohort.events, &paths.samples())?;
    OutcomeTable::write(&cohort.outcomes, &paths.outcomes())?;
    write_file(&paths.data.join("latents.jsonl"), &to_jsonl(&cohort.latents))?;
    let pos = cohort.samples.iter().filter(|s| s.label == 1).count();
    println!(
        "synth: task {} with {} samples ({pos} positive), {n} blocks over {} sources",
        spec.task_id,
        cohort.samples.len(),
        catalog.len()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BlockIndex {
    files: Vec<String>,
    n_samples: usize,
    present: Vec<(String, usize)>,
}

fn ingest(ctx: &Context) -> Result<i32> {
    let catalog = ctx.catalog()?;
    let dir = ctx.cfg.paths.blocks();
    let files = block_files_in(&dir)?;
    let store = ctx.block_store(&catalog)?;
    let present: Vec<(String, usize)> = catalog
        .sources()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), store.samples().filter(|id| store.is_present(id, i)).count()))
        .collect();
    let index = BlockIndex {
        files: files.iter().map(|f| f.display().to_string()).collect(),
        n_samples: store.n_samples(),
        present,
    };
    let path = ctx.cfg.paths.data.join("block_index.json");
    write_file(&path, &(serde_json::to_string_pretty(&index).expect("index serializes") + "\n"))?;
    println!("ingest: {} samples from {} files", index.n_samples, index.files.len());
    for (id, n) in &index.present {
        println!("  {id}: {n} present");
    }
    Ok(EXIT_OK)
}

fn featurize(ctx: &Context) -> Result<i32> {
    let catalog = ctx.catalog()?;
    let records = load_records(&ctx.cfg.paths.records())?;
    let events = load_sampling_events(&ctx.cfg.paths.samples())?;
    let store = featurize_records(&catalog, &records, &events)?;
    create_dir(&ctx.cfg.paths.blocks())?;
    let n = store.write_jsonl(&ctx.cfg.paths.blocks().join("featurized.jsonl"), None)?;
    println!("featurize: {} records, {} samples, {n} blocks", records.len(), store.n_samples());
    Ok(EXIT_OK)
}

fn matrix(ctx: &Context) -> Result<i32> {
    let tasks = ctx.tasks()?;
    let datasets = ctx.datasets(&tasks)?;
    let matrix_tasks: Vec<MatrixTask> = datasets
        .iter()
        .zip(&tasks)
        .map(|(d, t)| MatrixTask {
            dataset: d,
            excluded: &t.excluded_sources,
        })
        .collect();
    let options = MatrixOptions::new(
        ctx.cfg.repeats,
        ctx.cfg.seed,
        ctx.cfg.learner_config(),
        ctx.cfg.parallelism,
    );
    let s = run_matrix(&matrix_tasks, &options, &ctx.cfg.paths.results)?;
    println!(
        "matrix: {} expected, {} already stored, {} trained, {} failed",
        s.expected, s.skipped, s.trained, s.failed
    );
    if s.failures_in_store > 0 {
        eprintln!("matrix: {} failure rows in store", s.failures_in_store);
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn report(ctx: &Context) -> Result<i32> {
    let tasks = ctx.tasks()?;
    let records = ctx.records()?;
    let baseline = ctx.cfg.report.delta_baseline;
    let other = match baseline {
        BaselineKind::Constituent => BaselineKind::AllSingles,
        BaselineKind::AllSingles => BaselineKind::Constituent,
    };
    for t in &tasks {
        let dir = ctx.report_dir(&t.id);
        let grid = grid_report(&records, &t.id)?;
        write_file(&dir.join("grid.csv"), &grid.to_csv())?;
        write_file(&dir.join("grid_long.csv"), &grid.to_long_csv())?;
        let delta = delta_report(&records, &t.id, baseline)?;
        write_file(&dir.join("delta.csv"), &delta.to_csv())?;
        write_file(&dir.join("delta_long.csv"), &delta.to_long_csv())?;
        let alt = delta_report(&records, &t.id, other)?;
        write_file(&dir.join(format!("delta_{}.csv", other.as_str())), &alt.to_csv())?;

        let summaries = subset_summaries(&records, &t.id);
        match ctx.cli.format {
            Format::Csv => {
                let mut out = String::from("subset_id,n_sources,n_modalities,repeats,mean_auroc,sd_auroc\n");
                for s in summaries.values() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        s.subset_id, s.n_sources, s.n_modalities, s.repeats, s.mean, s.sd
                    ));
                }
                write_file(&dir.join("subsets.csv"), &out)?;
            }
            Format::Jsonl => write_file(&dir.join("subsets.jsonl"), &to_jsonl(summaries.values()))?,
        }
        let failed = records.iter().filter(|r| r.task_id == t.id && !r.is_ok()).count();
        let mut text = format!(
            "task {}\nsubsets with results: {}\nfailure rows: {failed}\ndelta baseline: {}\n\n",
            t.id,
            summaries.len(),
            baseline.as_str()
        );
        text.push_str("AUROC grid (rows: modalities, columns: sources, mean|sd)\n");
        text.push_str(&grid.to_csv());
        text.push_str("\nmean percent AUROC change vs single-source models\n");
        text.push_str(&delta.to_csv());
        text.push('\n');
        text.push_str(&modality_count_footer(&records, &t.id));
        write_file(&dir.join("summary.txt"), &text)?;
        println!("report: {} -> {}", t.id, dir.display());
    }
    roc_exports(ctx, &tasks, &records)?;
    Ok(EXIT_OK)
}

/// Recomputes the configured subsets' test predictions and writes ROC curves.
fn roc_exports(ctx: &Context, tasks: &[&TaskConfig], records: &[crate::harness::ExperimentRecord]) -> Result<()> {
    let datasets = ctx.datasets(tasks)?;
    let learner = ctx.cfg.learner_config();
    for (data, t) in datasets.iter().zip(tasks) {
        let catalog = data.store.catalog();
        let ids: Vec<Option<&str>> = if ctx.cfg.report.roc_subsets.is_empty() {
            vec![None]
        } else {
            ctx.cfg.report.roc_subsets.iter().map(|s| Some(s.as_str())).collect()
        };
        for id in ids {
            let set = ctx.subset_or_full(catalog, t, id)?;
            let subset_id = set.canonical_id(catalog);
            for r in records.iter().filter(|r| r.task_id == t.id && r.mask == set.0 && r.is_ok()) {
                let out = run_repeat(data, set, &learner, r.repeat, ctx.cfg.seed)?;
                if Some(out.test_auroc) != r.test_auroc {
                    return Err(Error::Validation(format!(
                        "recomputed AUROC for {}/{subset_id}/{} differs from the store; \
                         was the store produced with another config or seed?",
                        t.id, r.repeat
                    )));
                }
                let points = roc_curve(&out.test_scores, &out.test_labels)?;
                let path = ctx
                    .report_dir(&t.id)
                    .join("roc")
                    .join(format!("{subset_id}.r{}.csv", r.repeat));
                create_dir(path.parent().expect("has parent"))?;
                write_roc_csv(&points, &path)?;
            }
        }
    }
    Ok(())
}

fn shapley(ctx: &Context) -> Result<i32> {
    let tasks = ctx.tasks()?;
    let records = ctx.records()?;
    let catalog = ctx.catalog()?;
    for t in &tasks {
        let dir = ctx.report_dir(&t.id);
        let report = if ctx.cfg.shapley.per_repeat {
            let games = build_games_per_repeat(&records, &t.id, &catalog, &t.excluded_sources)?;
            let reports = games
                .iter()
                .map(|g| ShapleyReport::from_game(g, &catalog))
                .collect::<Result<Vec<_>>>()?;
            ShapleyReport::average(&reports)?
        } else {
            let game = build_game(&records, &t.id, &catalog, &t.excluded_sources)?;
            ShapleyReport::from_game(&game, &catalog)?
        };
        write_file(&dir.join("shapley_sources.csv"), &report.source_waterfall_csv())?;
        write_file(&dir.join("shapley_modalities_summed.csv"), &report.modality_waterfall_csv())?;
        if ctx.cli.format == Format::Jsonl {
            write_file(&dir.join("shapley.jsonl"), &to_jsonl([&report]))?;
        }
        let mut games = Vec::new();
        for pooling in [ModalityPooling::ExactCover, ModalityPooling::Within] {
            let game = build_modality_game(&records, &t.id, &catalog, &t.excluded_sources, pooling)?;
            let phi = modality_game_shapley(&game)?;
            let csv = waterfall_csv(game.empty_value(), phi.iter().map(|(k, v)| (k.as_str(), *v)));
            write_file(&dir.join(format!("shapley_modality_game_{}.csv", pooling.as_str())), &csv)?;
            games.push(phi);
        }
        println!(
            "shapley: {} ({} players, v(full) = {:.6}, efficiency residual {:.3e})",
            t.id,
            report.players.len(),
            report.full_value,
            report.efficiency_residual
        );
        for (p, v) in report.players.iter().zip(&report.phi) {
            println!("  {p:>12} {v:+.6}");
        }
        for (m, v) in &report.modality_phi {
            println!("  {:>12} {v:+.6} (summed)", m.as_str());
        }
        if games[0] != games[1] {
            println!("  modality game differs between exact-cover and within pooling; both written");
        }
    }
    Ok(EXIT_OK)
}

fn sweep(ctx: &Context) -> Result<i32> {
    let tasks = ctx.tasks()?;
    let datasets = ctx.datasets(&tasks)?;
    let learner = ctx.cfg.learner_config();
    for (data, t) in datasets.iter().zip(&tasks) {
        let set = ctx.subset_or_full(data.store.catalog(), t, ctx.cfg.sweep.subset.as_deref())?;
        let table = missingness_sweep(
            data,
            set,
            &learner,
            ctx.cfg.repeats,
            ctx.cfg.seed,
            &ctx.cfg.sweep.rates,
            ctx.cfg.sweep.seed,
        )?;
        let dir = ctx.report_dir(&t.id);
        match ctx.cli.format {
            Format::Csv => write_file(&dir.join("sweep.csv"), &table.to_csv())?,
            Format::Jsonl => write_file(&dir.join("sweep.jsonl"), &to_jsonl(&table.rows))?,
        }
        println!("sweep: {} on {}", t.id, table.subset_id);
        for r in &table.rows {
            println!("  p = {:<5} AUROC {:.4} ± {:.4}", r.rate, r.mean, r.sd);
        }
    }
    Ok(EXIT_OK)
}

fn validate(ctx: &Context) -> Result<i32> {
    let tasks = ctx.tasks()?;
    let datasets = ctx.datasets(&tasks)?;
    let mut jobs = 0;
    for (data, t) in datasets.iter().zip(&tasks) {
        let subsets = enumerate_subsets(data.store.catalog(), &t.excluded_sources)?;
        let pos = data.labels().iter().filter(|&&l| l == 1).count();
        println!(
            "validate: task {} has {} samples ({pos} positive), {} subsets",
            t.id,
            data.samples.len(),
            subsets.len()
        );
        jobs += subsets.len() * ctx.cfg.repeats;
    }
    println!("validate: {jobs} jobs in the full matrix");
    Ok(EXIT_OK)
}
