//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use fusebench::attribution::{aggregate_modalities, build_game, efficiency_residual, shapley_exact, CoalitionGame};
use fusebench::evaluation::{
    auroc, group_stratified_split, repeated_experiment, roc_curve, run_repeat, trapezoid_area, Dataset,
    LearnerConfig, LearnerKind,
};
use fusebench::featurization::{featurize_event_group, featurize_signal, fusion_matrix, SignalStats};
use fusebench::harness::{
    delta_report, enumerate_subsets, grid_report, missingness_sweep, modality_count_totals, run_matrix,
    BaselineKind, ExperimentRecord, MatrixOptions, MatrixTask, ResultsStore,
};
use fusebench::learner::{expand_grid, logreg_objective, train_gbdt, train_gbdt_traced, GbdtHyperparams};
use fusebench::record_store::catalog::{SourceSet, CHART_SIGNALS, LAB_SIGNALS, PROCEDURE_SIGNALS};
use fusebench::record_store::{BlockStore, LabeledSample, Observation, PatientRecord, SourceCatalog};
use fusebench::rng;
use fusebench::synthetic::{generate_cohort, CohortSpec};
use fusebench::Matrix;

struct Fail(String);

impl From<String> for Fail {
    fn from(s: String) -> Self {
        Fail(s)
    }
}

impl From<&str> for Fail {
    fn from(s: &str) -> Self {
        Fail(s.to_string())
    }
}

impl From<fusebench::Error> for Fail {
    fn from(e: fusebench::Error) -> Self {
        Fail(e.to_string())
    }
}

type Outcome = Result<String, Fail>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(Fail(format!($($fmt)+)));
        }
    };
}

struct Suite {
    failures: usize,
    /// Name filters from the command line; all criteria run when empty.
    filters: Vec<String>,
}

impl Suite {
    fn run(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        if !self.filters.is_empty() && !self.filters.iter().any(|f| name.contains(f.as_str())) {
            return;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(Fail(format!("panicked: {}", panic_text(&p)))));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > budget => Err(Fail(format!("{d}; took {elapsed:.1?}, budget {budget:?}"))),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS  {name} ({:.1}s): {detail}", elapsed.as_secs_f64()),
            Err(Fail(why)) => {
                self.failures += 1;
                println!("FAIL  {name} ({:.1}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// ---------------------------------------------------------------- oracles

/// Counts of subsets per modality number from the product identity.
fn product_identity(sizes: &[u32]) -> Vec<u64> {
    let mut out = vec![0u64; sizes.len() + 1];
    for m in 1u32..(1 << sizes.len()) {
        let prod: u64 = (0..sizes.len())
            .filter(|i| m >> i & 1 == 1)
            .map(|i| (1u64 << sizes[i]) - 1)
            .product();
        out[m.count_ones() as usize] += prod;
    }
    out.remove(0);
    out
}

fn pair_count_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn permutation_shapley(game: &CoalitionGame) -> Vec<f64> {
    fn permute(k: usize, order: &mut Vec<usize>, game: &CoalitionGame, acc: &mut [f64], count: &mut f64) {
        if k == order.len() {
            let mut c = 0usize;
            for &p in order.iter() {
                acc[p] += game.value(c | 1 << p) - game.value(c);
                c |= 1 << p;
            }
            *count += 1.0;
            return;
        }
        for i in k..order.len() {
            order.swap(k, i);
            permute(k + 1, order, game, acc, count);
            order.swap(k, i);
        }
    }
    let n = game.n_players();
    let mut acc = vec![0.0; n];
    let mut count = 0.0;
    permute(0, &mut (0..n).collect(), game, &mut acc, &mut count);
    acc.iter().map(|a| a / count).collect()
}

/// Textbook statistics, computed independently of the featurizer.
fn naive_stats(t: &[f64], v: &[f64]) -> [f64; 11] {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = s.len();
    let median = if k % 2 == 1 { s[k / 2] } else { 0.5 * (s[k / 2 - 1] + s[k / 2]) };
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut peaks = 0.0;
    for i in 1..k.saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] > v[i + 1] {
            peaks += 1.0;
        }
    }
    let (st, sv) = (t.iter().sum::<f64>(), v.iter().sum::<f64>());
    let stt: f64 = t.iter().map(|x| x * x).sum();
    let stv: f64 = t.iter().zip(v).map(|(a, b)| a * b).sum();
    let den = n * stt - st * st;
    let slope = if k < 2 || den.abs() < 1e-9 * n * stt.max(1.0) { 0.0 } else { (n * stv - st * sv) / den };
    let (msd, masd) = if k < 2 {
        (0.0, 0.0)
    } else {
        ((v[k - 1] - v[0]) / (n - 1.0), v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0))
    };
    [n, s[k - 1], s[0], mean, median, var.sqrt(), var, peaks, slope, msd, masd]
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

// ------------------------------------------------------------- criteria

fn subset_combinatorics() -> Outcome {
    let cat = SourceCatalog::standard();
    let all = enumerate_subsets::<&str>(&cat, &[])?;
    ensure!(all.len() == 2047, "{} subsets for 11 sources", all.len());
    let chest = enumerate_subsets(&cat, &["radn"])?;
    ensure!(chest.len() == 1023, "{} subsets for 10 sources", chest.len());
    let got: Vec<u64> = modality_count_totals(&chest).values().map(|&v| v as u64).collect();
    ensure!(got == [26, 196, 486, 315], "chest totals {got:?}");
    ensure!(got == product_identity(&[1, 3, 2, 4]), "chest totals disagree with product identity");
    let got: Vec<u64> = modality_count_totals(&all).values().map(|&v| v as u64).collect();
    ensure!(got == product_identity(&[1, 3, 3, 4]), "11-source totals {got:?}");
    ensure!(got == [30, 288, 994, 735], "11-source totals {got:?}");
    Ok(format!("2047 / 1023 subsets, chest totals {:?}", [26, 196, 486, 315]))
}

fn auroc_oracle() -> Outcome {
    let mut r = rng::rng(11);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = r.gen_range(2..=200);
        let levels = r.gen_range(2..=25);
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..levels) as f64 / 7.0 - 1.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| r.gen_bool(0.4) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let a = auroc(&scores, &labels)?;
        let b = pair_count_auroc(&scores, &labels);
        worst = worst.max((a - b).abs());
        ensure!((a - b).abs() <= 1e-12, "case {case}: {a} vs pair count {b}");
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = a + auroc(&neg, &labels)?;
        ensure!(sum == 1.0, "case {case}: auroc(s) + auroc(-s) = {sum:e}");
        let trap = trapezoid_area(&roc_curve(&scores, &labels)?);
        ensure!((trap - a).abs() <= 1e-12, "case {case}: trapezoid {trap} vs {a}");
    }
    Ok(format!("1000 tied instances, max |Δ| vs pair count {worst:.1e}"))
}

fn random_game(r: &mut rng::Rng, n: usize) -> CoalitionGame {
    let names = (0..n).map(|i| format!("p{i}")).collect();
    let mut values: Vec<f64> = (0..1usize << n).map(|_| r.gen_range(0.3..1.0)).collect();
    values[0] = 0.5;
    CoalitionGame::new(names, values).unwrap()
}

fn shapley_axioms() -> Outcome {
    let mut r = rng::rng(12);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_eff: f64 = 0.0;
    for g in 0..100 {
        let n = r.gen_range(1..=8);
        let game = random_game(&mut r, n);
        let phi = shapley_exact(&game)?;
        let oracle = permutation_shapley(&game);
        for (a, b) in phi.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max((a - b).abs());
            ensure!((a - b).abs() < 1e-9, "game {g}: {a} vs oracle {b}");
        }
        let eff = efficiency_residual(&game, &phi).abs();
        worst_eff = worst_eff.max(eff);
        ensure!(eff < 1e-9, "game {g}: efficiency residual {eff:e}");

        // dummy: last player never changes the value
        let m = n.min(7);
        let base = random_game(&mut r, m);
        let with_dummy = CoalitionGame::from_fn((0..=m).map(|i| format!("p{i}")).collect(), |c| {
            base.value(c & ((1 << m) - 1))
        })?;
        let phi_d = shapley_exact(&with_dummy)?;
        ensure!(phi_d[m] == 0.0, "game {g}: dummy φ = {:e}", phi_d[m]);
        let eff = efficiency_residual(&with_dummy, &phi_d).abs();
        ensure!(eff < 1e-9, "game {g}: dummy-game efficiency residual {eff:e}");

        // symmetry: players 0 and 1 are interchangeable
        if n >= 2 {
            let sym = CoalitionGame::from_fn(game.players.clone(), |c| {
                let swapped = (c & !3) | ((c & 1) << 1) | ((c & 2) >> 1);
                let lo = c.min(swapped);
                game.value(lo)
            })?;
            let phi_s = shapley_exact(&sym)?;
            ensure!(phi_s[0] == phi_s[1], "game {g}: symmetric players got {} and {}", phi_s[0], phi_s[1]);
        }

        // linearity
        let other = random_game(&mut r, n);
        let (alpha, beta) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let combo = CoalitionGame::from_fn(game.players.clone(), |c| alpha * game.value(c) + beta * other.value(c))?;
        let lhs = shapley_exact(&combo)?;
        let phi_o = shapley_exact(&other)?;
        for i in 0..n {
            let rhs = alpha * phi[i] + beta * phi_o[i];
            ensure!((lhs[i] - rhs).abs() < 1e-12, "game {g}: linearity off by {:e}", (lhs[i] - rhs).abs());
        }
    }
    // spec example
    let v = [0.5, 0.6, 0.55, 0.7, 0.5, 0.65, 0.6, 0.8];
    let g = CoalitionGame::new(vec!["1".into(), "2".into(), "3".into()], v.to_vec())?;
    let phi = shapley_exact(&g)?;
    let oracle = permutation_shapley(&g);
    for (i, want) in [0.15, 0.10, 0.05].iter().enumerate() {
        ensure!((oracle[i] - want).abs() < 1e-12, "oracle disagrees with the worked example");
        ensure!((phi[i] - want).abs() < 1e-12, "worked example φ = {phi:?}");
    }
    Ok(format!(
        "100 games, max |Δ| vs permutations {worst_oracle:.1e}, max efficiency residual {worst_eff:.1e}"
    ))
}

fn featurizer() -> Outcome {
    let cat = SourceCatalog::standard();
    let mut r = rng::rng(13);
    let mut rec = PatientRecord::new("p", "a", 0.0);
    let rosters = [("ce", CHART_SIGNALS, 99), ("le", LAB_SIGNALS, 242), ("pe", PROCEDURE_SIGNALS, 110)];
    for (id, roster, dim) in rosters {
        let spec = cat.get(id).ok_or("missing source")?;
        ensure!(spec.dim == dim, "{id} catalog dim {}", spec.dim);
        ensure!(spec.signals.len() * 11 == dim, "{id} roster of {}", spec.signals.len());
        let names: Vec<String> = roster.iter().map(|s| s.to_string()).collect();
        ensure!(names == spec.signals, "{id} roster differs from catalog");
        for name in roster.iter().step_by(2) {
            let pts = (0..5).map(|i| Observation { time: i as f64, value: r.gen() }).collect();
            rec.event_streams.insert(name.to_string(), pts);
        }
        let v = featurize_event_group(&rec, &names, Some(10.0))?;
        ensure!(v.len() == dim, "{id} vector has {} entries", v.len());
    }
    ensure!(cat.total_dim() == 4845, "catalog total {}", cat.total_dim());
    let mut store = BlockStore::new(cat.clone());
    for s in cat.sources() {
        store.insert("s1", &s.id, vec![0.25; s.dim])?;
    }
    let fused = fusion_matrix(&store, &["s1"], SourceSet::full(cat.len()));
    ensure!(fused.cols() == 4845, "fusion width {}", fused.cols());

    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = r.gen_range(1..=60);
        let mut t: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..200.0)).collect();
        t.sort_by(f64::total_cmp);
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-50.0..150.0)).collect();
        let pts: Vec<Observation> = t.iter().zip(&v).map(|(&time, &value)| Observation { time, value }).collect();
        let got = featurize_signal(&pts)?.to_array();
        let want = naive_stats(&t, &v);
        for k in 0..11 {
            let err = (got[k] - want[k]).abs() / want[k].abs().max(1.0);
            worst = worst.max(err);
            ensure!(err <= 1e-9, "signal {case} feature {k}: {} vs {}", got[k], want[k]);
        }
    }

    // shift and scale on dyadic-exact signals: integer values, power-of-two lengths
    for case in 0..1000 {
        let n = 1usize << r.gen_range(0..=6);
        let t: Vec<f64> = (0..n).map(|i| (i * r.gen_range(1..4)) as f64).collect();
        let mut t = t;
        t.sort_by(f64::total_cmp);
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-64..64) as f64).collect();
        let stats = |t: &[f64], v: &[f64]| -> fusebench::Result<SignalStats> {
            let pts: Vec<Observation> = t.iter().zip(v).map(|(&time, &value)| Observation { time, value }).collect();
            featurize_signal(&pts)
        };
        let base = stats(&t, &v)?;
        let c = r.gen_range(-32..32) as f64;
        let shifted = stats(&t, &v.iter().map(|x| x + c).collect::<Vec<_>>())?;
        let expect_shift = SignalStats {
            max: base.max + c,
            min: base.min + c,
            mean: base.mean + c,
            median: base.median + c,
            ..base
        };
        ensure!(shifted == expect_shift, "case {case}: value shift changed {base:?} to {shifted:?}");
        let scaled = stats(&t, &v.iter().map(|x| x * 2.0).collect::<Vec<_>>())?;
        let expect_scale = SignalStats {
            max: base.max * 2.0,
            min: base.min * 2.0,
            mean: base.mean * 2.0,
            median: base.median * 2.0,
            std: base.std * 2.0,
            variance: base.variance * 4.0,
            slope: base.slope * 2.0,
            mean_succ_diff: base.mean_succ_diff * 2.0,
            mean_abs_succ_diff: base.mean_abs_succ_diff * 2.0,
            ..base
        };
        ensure!(scaled == expect_scale, "case {case}: value scale broke equivariance");
        let later = stats(&t.iter().map(|x| x + 16.0).collect::<Vec<_>>(), &v)?;
        ensure!(later == base, "case {case}: time shift changed the features");
    }
    Ok(format!(
        "99/242/110/4845 dims, max rel. error vs naive {worst:.1e}, shift/scale exact on 1000 signals"
    ))
}

fn random_samples(r: &mut rng::Rng) -> Vec<LabeledSample> {
    let patients = r.gen_range(30..300);
    let rate = r.gen_range(0.2..0.8);
    let mut out = Vec::new();
    for p in 0..patients {
        for k in 0..r.gen_range(1..=4) {
            out.push(LabeledSample {
                sample_id: format!("p{p}_{k}"),
                patient_id: format!("p{p}"),
                sampling_time: k as f64,
                task_id: "t".into(),
                label: r.gen_bool(rate) as u8,
            });
        }
    }
    out.shuffle(r);
    out
}

fn desk_dataset(seed: u64) -> fusebench::Result<Dataset> {
    let spec = CohortSpec::desk(seed);
    let catalog = spec.catalog()?;
    let cohort = generate_cohort(&spec, &catalog)?;
    Dataset::new(&spec.task_id, cohort.store, cohort.samples)
}

fn reduced_learner() -> LearnerConfig {
    LearnerConfig {
        kind: LearnerKind::Gbdt,
        grid: expand_grid(&[3, 4], &[50], &[0.1]),
        folds: 5,
        test_fraction: 0.2,
    }
}

fn leakage_guards() -> Outcome {
    let mut r = rng::rng(14);
    let mut drawn = 0;
    for d in 0..1000 {
        let samples = random_samples(&mut r);
        let plan = group_stratified_split(&samples, 0.2, d).map_err(|e| format!("draw {d}: {e}"))?;
        let train: BTreeSet<&str> = plan.train.iter().map(|&i| samples[i].patient_id.as_str()).collect();
        let test: BTreeSet<&str> = plan.test.iter().map(|&i| samples[i].patient_id.as_str()).collect();
        ensure!(train.is_disjoint(&test), "draw {d}: patients on both sides");
        ensure!(plan.train.len() + plan.test.len() == samples.len(), "draw {d}: samples lost");
        drawn += 1;
    }
    let data = desk_dataset(0)?;
    ensure!(data.samples.len() == 2000, "desk cohort has {} samples", data.samples.len());
    let noise = SourceSet::parse(data.store.catalog(), "txt2")?;
    let s = repeated_experiment(&data, noise, &reduced_learner(), 3, 0)?;
    ensure!((s.mean_auroc - 0.5).abs() <= 0.05, "noise-only mean AUROC {}", s.mean_auroc);
    Ok(format!("{drawn} splits without overlap; noise-only AUROC {:.4}", s.mean_auroc))
}

fn learner_sanity() -> Outcome {
    let mut r = rng::rng(15);
    for d in 0..20 {
        let (n, p) = (r.gen_range(50..300), r.gen_range(1..8));
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<u8> = rows.iter().map(|row| (row[0] + r.gen_range(-0.7..0.7) > 0.0) as u8).collect();
        let x = Matrix::from_rows(&rows)?;
        let hp = GbdtHyperparams::new(r.gen_range(1..=6), 40, r.gen_range(0.05..0.6));
        let (_, trace) = train_gbdt_traced(&x, &y, &hp, d)?;
        for (i, w) in trace.windows(2).enumerate() {
            ensure!(w[1] <= w[0], "dataset {d}: loss rose at iteration {i}: {} -> {}", w[0], w[1]);
        }
    }

    let xor = |r: &mut rng::Rng, n: usize| {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
        let y: Vec<u8> = rows.iter().map(|v| ((v[0] > 0.0) != (v[1] > 0.0)) as u8).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    };
    let (xt, yt) = xor(&mut r, 1000);
    let (xh, yh) = xor(&mut r, 500);
    let model = train_gbdt(&xt, &yt, &GbdtHyperparams::new(2, 100, 0.3), 0)?;
    let xor_auc = auroc(&model.predict_scores(&xh)?, &yh)?;
    ensure!(xor_auc >= 0.95, "XOR held-out AUROC {xor_auc}");

    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (n, p) = (r.gen_range(10..80), r.gen_range(1..6));
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let x = Matrix::from_rows(&rows)?;
        let y: Vec<u8> = (0..n).map(|_| r.gen_bool(0.5) as u8).collect();
        let params: Vec<f64> = (0..=p).map(|_| r.gen_range(-1.0..1.0)).collect();
        let l2 = r.gen_range(0.0..1.0);
        let (_, grad) = logreg_objective(&x, &y, l2, &params);
        let h = 1e-5;
        let mut fd = vec![0.0; params.len()];
        for k in 0..params.len() {
            let (mut up, mut dn) = (params.clone(), params.clone());
            up[k] += h;
            dn[k] -= h;
            fd[k] = (logreg_objective(&x, &y, l2, &up).0 - logreg_objective(&x, &y, l2, &dn).0) / (2.0 * h);
        }
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (g, f)| m.max((g - f).abs())) / scale;
        worst = worst.max(err);
        ensure!(err < 1e-5, "case {case}: gradient relative error {err:e}");
    }

    let data = desk_dataset(3)?;
    let set = SourceSet::parse(data.store.catalog(), "tab+ts1+img2")?;
    let learner = reduced_learner();
    let fingerprint = |threads: usize| -> fusebench::Result<(String, Vec<u64>)> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let out = run_repeat(&data, set, &learner, 0, 7)?;
            let json = match &out.model {
                fusebench::evaluation::FittedModel::Gbdt(m) => m.to_json(),
                other => format!("{other:?}"),
            };
            Ok((json, out.test_scores.iter().map(|s| s.to_bits()).collect()))
        })
    };
    let a = fingerprint(1)?;
    let b = fingerprint(4)?;
    let c = fingerprint(4)?;
    ensure!(a == b, "parallelism 1 and 4 produced different models");
    ensure!(b == c, "two runs produced different models");
    Ok(format!(
        "20 monotone loss traces, XOR AUROC {xor_auc:.4}, gradient rel. error {worst:.1e}, bitwise-stable"
    ))
}

struct DeskRun {
    seed: u64,
    dataset: Dataset,
    store: PathBuf,
    records: Vec<ExperimentRecord>,
}

fn desk_options(seed: u64, parallelism: usize) -> MatrixOptions {
    MatrixOptions::new(3, seed, reduced_learner(), parallelism)
}

fn desk_matrix(dir: &Path, runs: &RefCell<Vec<DeskRun>>) -> Outcome {
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let dataset = desk_dataset(seed)?;
        let store = dir.join(format!("desk-{seed}.jsonl"));
        let summary = run_matrix(
            &[MatrixTask { dataset: &dataset, excluded: &[] }],
            &desk_options(seed, 4),
            &store,
        )?;
        ensure!(summary.expected == 127 * 3, "seed {seed}: {} jobs", summary.expected);
        ensure!(summary.trained == 381 && summary.failed == 0, "seed {seed}: {summary:?}");
        let records = ResultsStore::read(&store)?;
        ensure!(records.len() == 381, "seed {seed}: {} records", records.len());

        let grid = grid_report(&records, &dataset.task_id)?;
        let mut rhos = Vec::new();
        for m in 1..=grid.max_modalities {
            let cells: Vec<(f64, f64)> = (1..=grid.max_sources)
                .filter_map(|s| grid.cell(m, s).map(|c| (s as f64, c.mean)))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = cells.into_iter().unzip();
            let rho = spearman(&xs, &ys);
            ensure!(rho > 0.9, "seed {seed}: modality row {m} has Spearman ρ {rho:.3} over {ys:?}");
            rhos.push(rho);
        }
        let delta = delta_report(&records, &dataset.task_id, BaselineKind::Constituent)?;
        let cells: Vec<f64> = delta.grid.cells.values().map(|c| c.mean).collect();
        let min = cells.iter().copied().fold(f64::INFINITY, f64::min);
        let avg = cells.iter().sum::<f64>() / cells.len() as f64;
        ensure!(min >= -2.0, "seed {seed}: delta cell {min:.3}%");
        ensure!(avg > 0.0, "seed {seed}: mean delta {avg:.3}%");
        lines.push(format!(
            "seed {seed}: min ρ {:.3}, Δ% min {min:.2} mean {avg:.2}",
            rhos.iter().copied().fold(f64::INFINITY, f64::min)
        ));
        runs.borrow_mut().push(DeskRun { seed, dataset, store, records });
    }
    Ok(format!("3 × 381 models; {}", lines.join("; ")))
}

fn attribution(runs: &RefCell<Vec<DeskRun>>) -> Outcome {
    let runs = runs.borrow();
    ensure!(runs.len() == 3, "desk matrix did not complete");
    let mut lines = Vec::new();
    for run in runs.iter() {
        let catalog = run.dataset.store.catalog();
        let game = build_game::<&str>(&run.records, &run.dataset.task_id, catalog, &[])?;
        ensure!(game.values().len() == 128, "game has {} values", game.values().len());
        let phi = shapley_exact(&game)?;
        let eff = efficiency_residual(&game, &phi).abs();
        ensure!(eff < 1e-9, "seed {}: efficiency residual {eff:e}", run.seed);
        let k = game.players.iter().position(|p| p == "txt2").ok_or("no txt2 player")?;
        ensure!(phi[k].abs() < 0.02, "seed {}: φ(txt2) = {:.4}", run.seed, phi[k]);
        let agg = aggregate_modalities(&game.players, &phi, catalog)?;
        for (m, v) in &agg {
            let members: Vec<f64> = game
                .players
                .iter()
                .zip(&phi)
                .filter(|(p, _)| catalog.get(p).unwrap().modality == *m)
                .map(|(_, v)| *v)
                .collect();
            let direct = match members.as_slice() {
                [a] => *a,
                [a, b] => a + b,
                _ => return Err(Fail(format!("unexpected member count for {m:?}"))),
            };
            ensure!(*v == direct, "seed {}: {m:?} aggregate {v} vs member sum {direct}", run.seed);
        }
        lines.push(format!("seed {}: φ(txt2) {:+.4}, residual {eff:.1e}", run.seed, phi[k]));
    }
    Ok(lines.join("; "))
}

fn resumability(dir: &Path, runs: &RefCell<Vec<DeskRun>>) -> Outcome {
    let runs = runs.borrow();
    let reference = runs.first().ok_or("desk matrix did not complete")?;
    let path = dir.join("desk-0-resumed.jsonl");
    let task = [MatrixTask { dataset: &reference.dataset, excluded: &[] }];
    let mut opts = desk_options(0, 1);
    opts.max_new_jobs = Some(190);
    let first = run_matrix(&task, &opts, &path)?;
    ensure!(first.trained == 190 && first.remaining == 191, "interrupted run: {first:?}");
    // a kill mid-write leaves a torn line behind
    let mut bytes = fs::read(&path).map_err(|e| e.to_string())?;
    bytes.extend_from_slice(br#"{"task_id":"synthetic","subset_id":"tab+ts"#);
    fs::write(&path, bytes).map_err(|e| e.to_string())?;
    opts.max_new_jobs = None;
    let second = run_matrix(&task, &opts, &path)?;
    ensure!(second.skipped == 190 && second.trained == 191, "resumed run: {second:?}");
    let again = run_matrix(&task, &desk_options(0, 4), &path)?;
    ensure!(again.trained == 0 && again.skipped == 381, "idempotence: {again:?}");
    let a = fs::read(&reference.store).map_err(|e| e.to_string())?;
    let b = fs::read(&path).map_err(|e| e.to_string())?;
    ensure!(a == b, "interrupted parallelism-1 store differs from uninterrupted parallelism-4 store");
    Ok(format!("{} bytes identical after kill/resume at parallelism 1 vs 4", a.len()))
}

fn sweep(runs: &RefCell<Vec<DeskRun>>) -> Outcome {
    let runs = runs.borrow();
    ensure!(runs.len() == 3, "desk matrix did not complete");
    let rates = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut per_seed: Vec<Vec<f64>> = Vec::new();
    for run in runs.iter() {
        let full = SourceSet::full(run.dataset.store.catalog().len());
        let table = missingness_sweep(&run.dataset, full, &reduced_learner(), 3, run.seed, &rates, 100 + run.seed)?;
        let stored: Vec<f64> = (0..3)
            .map(|rep| {
                run.records
                    .iter()
                    .find(|r| r.mask == full.0 && r.repeat == rep)
                    .and_then(|r| r.test_auroc)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        ensure!(
            table.rows[0].per_repeat == stored,
            "seed {}: p = 0 gives {:?}, store has {stored:?}",
            run.seed,
            table.rows[0].per_repeat
        );
        ensure!(
            table.rows[4].per_repeat.iter().all(|&a| a == 0.5),
            "seed {}: p = 1 gives {:?}",
            run.seed,
            table.rows[4].per_repeat
        );
        per_seed.push(table.rows.iter().map(|r| r.mean).collect());
    }
    let means: Vec<f64> = (0..rates.len()).map(|k| per_seed.iter().map(|s| s[k]).sum::<f64>() / 3.0).collect();
    let sds: Vec<f64> = (0..rates.len())
        .map(|k| sample_sd(&per_seed.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect();
    for k in 0..rates.len() - 1 {
        let tol = 2.0 * (sds[k].powi(2) + sds[k + 1].powi(2)).sqrt();
        ensure!(
            means[k + 1] <= means[k] + tol,
            "AUROC rises from {:.4} at p = {} to {:.4} at p = {} (tolerance {tol:.4})",
            means[k],
            rates[k],
            means[k + 1],
            rates[k + 1]
        );
    }
    ensure!(means[2] < means[0] && means[2] > means[4], "p = 0.5 mean {:.4} not strictly inside", means[2]);
    let shown: Vec<String> = rates.iter().zip(&means).map(|(p, m)| format!("{p}:{m:.4}")).collect();
    Ok(format!("3-seed means {}", shown.join(" ")))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let runs = RefCell::new(Vec::new());
    let filters = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut suite = Suite { failures: 0, filters };
    suite.run("subset combinatorics", secs(1), subset_combinatorics);
    suite.run("AUROC oracle", secs(10), auroc_oracle);
    suite.run("Shapley axioms and oracle", secs(30), shapley_axioms);
    suite.run("featurizer dimensions and oracle", secs(10), featurizer);
    suite.run("leakage guards", secs(120), leakage_guards);
    suite.run("learner sanity", secs(120), learner_sanity);
    suite.run("desk-scale matrix", secs(15 * 60), || desk_matrix(dir.path(), &runs));
    suite.run("attribution integration", secs(60), || attribution(&runs));
    suite.run("resumability and determinism", secs(20 * 60), || resumability(dir.path(), &runs));
    suite.run("missingness sweep", secs(10 * 60), || sweep(&runs));
    println!("{} criteria failed", suite.failures);
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
