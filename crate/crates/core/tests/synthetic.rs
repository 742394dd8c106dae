use fusebench::evaluation::{repeated_experiment, Dataset, LearnerConfig, LearnerKind};
use fusebench::learner::GbdtHyperparams;
use fusebench::record_store::catalog::SourceSet;
use fusebench::synthetic::{generate_cohort, CohortSpec};

const INFORMATIVE: [&str; 6] = ["tab", "ts1", "ts2", "txt1", "img1", "img2"];

fn dataset(mut spec: CohortSpec) -> Dataset {
    spec.n_patients = 400;
    let catalog = spec.catalog().unwrap();
    let cohort = generate_cohort(&spec, &catalog).unwrap();
    Dataset::new(&spec.task_id, cohort.store, cohort.samples).unwrap()
}

fn learner() -> LearnerConfig {
    LearnerConfig {
        kind: LearnerKind::Gbdt,
        grid: vec![GbdtHyperparams::new(3, 40, 0.1)],
        folds: 3,
        test_fraction: 0.2,
    }
}

/// Percent change of the all-informative set over the mean single-source AUROC.
fn multi_source_gain(data: &Dataset, seed: u64) -> f64 {
    let catalog = data.store.catalog();
    let auc = |ids: &[&str]| {
        let set = SourceSet::from_ids(catalog, ids).unwrap();
        repeated_experiment(data, set, &learner(), 2, seed).unwrap().mean_auroc
    };
    let singles = INFORMATIVE.iter().map(|id| auc(&[id])).sum::<f64>() / INFORMATIVE.len() as f64;
    100.0 * (auc(&INFORMATIVE) - singles) / singles
}

#[test]
fn redundant_sources_gain_less_from_fusion() {
    for seed in 0..3 {
        let independent = multi_source_gain(&dataset(CohortSpec::desk(seed)), seed);
        let redundant = multi_source_gain(&dataset(CohortSpec::desk_redundant(seed)), seed);
        assert!(
            redundant < independent,
            "seed {seed}: redundant gain {redundant:.2}% vs independent {independent:.2}%"
        );
    }
}

#[test]
fn noise_source_stays_near_chance() {
    let data = dataset(CohortSpec::desk(7));
    let set = SourceSet::parse(data.store.catalog(), "txt2").unwrap();
    let s = repeated_experiment(&data, set, &learner(), 3, 0).unwrap();
    assert!((s.mean_auroc - 0.5).abs() < 0.08, "{}", s.mean_auroc);
}

#[test]
fn informative_source_beats_chance() {
    let data = dataset(CohortSpec::desk(7));
    let set = SourceSet::parse(data.store.catalog(), "tab").unwrap();
    let s = repeated_experiment(&data, set, &learner(), 3, 0).unwrap();
    assert!(s.mean_auroc > 0.6, "{}", s.mean_auroc);
}
