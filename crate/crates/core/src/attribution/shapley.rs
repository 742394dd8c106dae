use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::game::{CoalitionGame, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::record_store::{Modality, SourceCatalog};

/// Correctly rounded floating-point sum (Shewchuk's partials, as in `fsum`).
/// The result depends only on the multiset of addends, not their order.
#[derive(Debug, Clone, Default)]
pub(crate) struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub(crate) fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub(crate) fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // round half-even across the remaining partials
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub(crate) fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = ExactSum::default();
    for v in values {
        s.add(v);
    }
    s.value()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    c as f64
}

/// Exact Shapley values by enumeration of every coalition.
pub fn shapley_exact(game: &CoalitionGame) -> Result<Vec<f64>> {
    let n = game.n_players();
    if n > MAX_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: n,
            max: MAX_PLAYERS,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // weight of a coalition of size s not containing i: s!(n-s-1)!/n! = 1 / (n * C(n-1, s))
    let weights: Vec<f64> = (0..n).map(|s| 1.0 / (n as f64 * binomial(n - 1, s))).collect();
    let mut acc = vec![ExactSum::default(); n];
    for c in 0..1usize << n {
        let s = c.count_ones() as usize;
        for (i, a) in acc.iter_mut().enumerate() {
            let bit = 1usize << i;
            if c & bit == 0 {
                a.add(weights[s] * (game.value(c | bit) - game.value(c)));
            }
        }
    }
    Ok(acc.iter().map(ExactSum::value).collect())
}

/// Σφ − (v(full) − v(∅)).
pub fn efficiency_residual(game: &CoalitionGame, phi: &[f64]) -> f64 {
    exact_sum(phi.iter().copied()) - (game.full_value() - game.empty_value())
}

/// Sums source values per modality. Modalities without players are omitted.
pub fn aggregate_modalities(
    players: &[String],
    phi: &[f64],
    catalog: &SourceCatalog,
) -> Result<BTreeMap<Modality, f64>> {
    let mut out: BTreeMap<Modality, ExactSum> = BTreeMap::new();
    for (p, &v) in players.iter().zip(phi) {
        let m = catalog
            .get(p)
            .ok_or_else(|| Error::UnknownSource(p.clone()))?
            .modality;
        out.entry(m).or_default().add(v);
    }
    Ok(out.iter().map(|(m, c)| (*m, c.value())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapleyReport {
    pub players: Vec<String>,
    pub phi: Vec<f64>,
    pub modality_phi: BTreeMap<Modality, f64>,
    pub empty_value: f64,
    pub full_value: f64,
    pub efficiency_residual: f64,
}

impl ShapleyReport {
    pub fn from_game(game: &CoalitionGame, catalog: &SourceCatalog) -> Result<Self> {
        let phi = shapley_exact(game)?;
        let modality_phi = aggregate_modalities(&game.players, &phi, catalog)?;
        Ok(ShapleyReport {
            players: game.players.clone(),
            efficiency_residual: efficiency_residual(game, &phi),
            phi,
            modality_phi,
            empty_value: game.empty_value(),
            full_value: game.full_value(),
        })
    }

    /// Element-wise mean of reports over the same players.
    pub fn average(reports: &[ShapleyReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::EmptySet("no reports to average".into()))?;
        if reports.iter().any(|r| r.players != first.players) {
            return Err(Error::Validation("reports cover different players".into()));
        }
        let k = reports.len() as f64;
        let mean = |f: &dyn Fn(&ShapleyReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let phi: Vec<f64> = (0..first.phi.len()).map(|i| mean(&|r| r.phi[i])).collect();
        let modality_phi = first
            .modality_phi
            .keys()
            .map(|m| (*m, mean(&|r| r.modality_phi[m])))
            .collect();
        let empty_value = mean(&|r| r.empty_value);
        let full_value = mean(&|r| r.full_value);
        Ok(ShapleyReport {
            players: first.players.clone(),
            efficiency_residual: exact_sum(phi.iter().copied()) - (full_value - empty_value),
            phi,
            modality_phi,
            empty_value,
            full_value,
        })
    }

    pub fn source_waterfall_csv(&self) -> String {
        waterfall_csv(
            self.empty_value,
            self.players.iter().map(String::as_str).zip(self.phi.iter().copied()),
        )
    }

    pub fn modality_waterfall_csv(&self) -> String {
        waterfall_csv(
            self.empty_value,
            self.modality_phi.iter().map(|(m, v)| (m.as_str(), *v)),
        )
    }
}

/// `entity,phi,cumulative` rows; the running total starts at the empty-coalition value.
pub fn waterfall_csv<'a>(start: f64, rows: impl Iterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("entity,phi,cumulative\n");
    let mut running = ExactSum::default();
    running.add(start);
    for (name, phi) in rows {
        running.add(phi);
        writeln!(out, "{name},{phi},{}", running.value()).unwrap();
    }
    out
}

/// Exact Shapley values of a modality-level game. Players are modality names.
pub fn modality_game_shapley(game: &CoalitionGame) -> Result<BTreeMap<String, f64>> {
    let phi = shapley_exact(game)?;
    Ok(game.players.iter().cloned().zip(phi).collect())
}
