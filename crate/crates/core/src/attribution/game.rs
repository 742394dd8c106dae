use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::reports::subset_summaries;
use crate::harness::store::ExperimentRecord;
use crate::harness::subsets::included_sources;
use crate::record_store::catalog::SourceSet;
use crate::record_store::{Modality, SourceCatalog};

/// Value assigned to the empty coalition: a model without inputs is a coin flip.
pub const EMPTY_VALUE: f64 = 0.5;
/// Largest player count handled by exact enumeration.
pub const MAX_PLAYERS: usize = 20;

/// Values of every coalition, indexed by bitmask over `players`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionGame {
    pub players: Vec<String>,
    values: Vec<f64>,
}

impl CoalitionGame {
    /// `values` must hold `2^n` finite entries; entry 0 is the empty coalition.
    pub fn new(players: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = players.len();
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: n,
                max: MAX_PLAYERS,
            });
        }
        if values.len() != 1usize << n {
            return Err(Error::Validation(format!(
                "{n} players need {} coalition values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coalition value {i}")));
        }
        Ok(CoalitionGame { players, values })
    }

    /// Builds a game from a value function over coalition masks.
    pub fn from_fn(players: Vec<String>, f: impl Fn(usize) -> f64) -> Result<Self> {
        let n = players.len();
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                players: n,
                max: MAX_PLAYERS,
            });
        }
        let values = (0..1usize << n).map(f).collect();
        Self::new(players, values)
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn value(&self, coalition: usize) -> f64 {
        self.values[coalition]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn empty_value(&self) -> f64 {
        self.values[0]
    }

    pub fn full_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Catalog indices of the included sources, in catalog order.
fn players_of<S: AsRef<str>>(catalog: &SourceCatalog, excluded: &[S]) -> Result<Vec<usize>> {
    Ok(included_sources(catalog, excluded)?.indices().collect())
}

fn to_catalog_mask(players: &[usize], coalition: usize) -> u64 {
    players
        .iter()
        .enumerate()
        .filter(|(j, _)| coalition >> j & 1 == 1)
        .fold(0u64, |m, (_, &idx)| m | 1u64 << idx)
}

fn missing_error(task_id: &str, missing: Vec<String>) -> Error {
    Error::IncompleteMatrix {
        task: task_id.to_string(),
        missing,
    }
}

/// Source-level game whose values are subset AUROCs averaged over repeats.
pub fn build_game<S: AsRef<str>>(
    records: &[ExperimentRecord],
    task_id: &str,
    catalog: &SourceCatalog,
    excluded: &[S],
) -> Result<CoalitionGame> {
    let players = players_of(catalog, excluded)?;
    let means: BTreeMap<u64, f64> = subset_summaries(records, task_id)
        .into_iter()
        .map(|(m, s)| (m, s.mean))
        .collect();
    game_from_means(&players, catalog, task_id, &means)
}

fn game_from_means(
    players: &[usize],
    catalog: &SourceCatalog,
    task_id: &str,
    means: &BTreeMap<u64, f64>,
) -> Result<CoalitionGame> {
    let n = players.len();
    if n > MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: n,
            max: MAX_PLAYERS,
        });
    }
    let mut values = vec![EMPTY_VALUE; 1usize << n];
    let mut missing = Vec::new();
    for (c, v) in values.iter_mut().enumerate().skip(1) {
        let mask = to_catalog_mask(players, c);
        match means.get(&mask) {
            Some(&m) => *v = m,
            None => missing.push(SourceSet(mask).canonical_id(catalog)),
        }
    }
    if !missing.is_empty() {
        return Err(missing_error(task_id, missing));
    }
    let names = players.iter().map(|&i| catalog.sources()[i].id.clone()).collect();
    CoalitionGame::new(names, values)
}

/// One source-level game per repeat index, each from that repeat's AUROCs alone.
pub fn build_games_per_repeat<S: AsRef<str>>(
    records: &[ExperimentRecord],
    task_id: &str,
    catalog: &SourceCatalog,
    excluded: &[S],
) -> Result<Vec<CoalitionGame>> {
    let players = players_of(catalog, excluded)?;
    let mut by_repeat: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task_id == task_id && r.is_ok()) {
        by_repeat
            .entry(r.repeat)
            .or_default()
            .insert(r.mask, r.test_auroc.expect("ok rows carry an AUROC"));
    }
    if by_repeat.is_empty() {
        return Err(Error::EmptyStore(task_id.to_string()));
    }
    by_repeat
        .values()
        .map(|means| game_from_means(&players, catalog, task_id, means))
        .collect()
}

/// How subsets are pooled into a modality coalition's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModalityPooling {
    /// Subsets whose modalities are exactly the coalition.
    #[default]
    ExactCover,
    /// Subsets whose modalities lie within the coalition.
    Within,
}

impl ModalityPooling {
    pub fn as_str(self) -> &'static str {
        match self {
            ModalityPooling::ExactCover => "exact_cover",
            ModalityPooling::Within => "within",
        }
    }
}

/// Modality-level game: v(M) is the mean AUROC over the subsets pooled for M.
pub fn build_modality_game<S: AsRef<str>>(
    records: &[ExperimentRecord],
    task_id: &str,
    catalog: &SourceCatalog,
    excluded: &[S],
    pooling: ModalityPooling,
) -> Result<CoalitionGame> {
    let players = players_of(catalog, excluded)?;
    let source_game = build_game(records, task_id, catalog, excluded)?;
    let mut modalities: Vec<Modality> = players.iter().map(|&i| catalog.sources()[i].modality).collect();
    modalities.sort_unstable();
    modalities.dedup();
    // modality bitmask of each source-coalition
    let cover = |c: usize| -> usize {
        players
            .iter()
            .enumerate()
            .filter(|(j, _)| c >> j & 1 == 1)
            .map(|(_, &idx)| {
                let m = catalog.sources()[idx].modality;
                1usize << modalities.binary_search(&m).expect("modality listed")
            })
            .fold(0, |a, b| a | b)
    };
    let k = modalities.len();
    let mut sums = vec![0.0; 1 << k];
    let mut counts = vec![0usize; 1 << k];
    for c in 1..1usize << players.len() {
        let m = cover(c);
        sums[m] += source_game.value(c);
        counts[m] += 1;
    }
    if pooling == ModalityPooling::Within {
        // subset-sum over modality masks
        for bit in 0..k {
            for m in 0..1usize << k {
                if m >> bit & 1 == 1 {
                    sums[m] += sums[m ^ 1 << bit];
                    counts[m] += counts[m ^ 1 << bit];
                }
            }
        }
    }
    let names = modalities.iter().map(|m| m.as_str().to_string()).collect();
    CoalitionGame::from_fn(names, |m| {
        if m == 0 {
            EMPTY_VALUE
        } else {
            sums[m] / counts[m] as f64
        }
    })
}
