use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record_store::{Observation, PatientRecord, Timestamp};

/// Number of statistics per time-series signal.
pub const N_SIGNAL_FEATURES: usize = 11;

/// Summary statistics of one time-series signal, in fixed feature order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalStats {
    pub n_samples: usize,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub variance: f64,
    /// Strict interior local maxima.
    pub n_peaks: usize,
    /// OLS slope of value against time, per hour.
    pub slope: f64,
    pub mean_succ_diff: f64,
    pub mean_abs_succ_diff: f64,
}

impl SignalStats {
    pub fn to_array(&self) -> [f64; N_SIGNAL_FEATURES] {
        [
            self.n_samples as f64,
            self.max,
            self.min,
            self.mean,
            self.median,
            self.std,
            self.variance,
            self.n_peaks as f64,
            self.slope,
            self.mean_succ_diff,
            self.mean_abs_succ_diff,
        ]
    }
}

pub fn featurize_signal(points: &[Observation]) -> Result<SignalStats> {
    for (i, w) in points.windows(2).enumerate() {
        if w[1].time < w[0].time {
            return Err(Error::Unsorted { index: i + 1 });
        }
    }
    let n = points.len();
    if n == 0 {
        return Ok(SignalStats::default());
    }
    let nf = n as f64;
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();

    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / nf;

    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };

    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
    let std = variance.sqrt();
    // keep variance == std² to the last bit
    let variance = std * std;

    let n_peaks = values
        .windows(3)
        .filter(|w| w[0] < w[1] && w[1] > w[2])
        .count();

    let t_mean = points.iter().map(|p| p.time).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        let dt = p.time - t_mean;
        sxy += dt * (p.value - mean);
        sxx += dt * dt;
    }
    let slope = if n < 2 || sxx == 0.0 { 0.0 } else { sxy / sxx };

    let (mean_succ_diff, mean_abs_succ_diff) = if n < 2 {
        (0.0, 0.0)
    } else {
        let m = (n - 1) as f64;
        let (s, a) = values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold((0.0, 0.0), |(s, a), d| (s + d, a + d.abs()));
        (s / m, a / m)
    };

    Ok(SignalStats {
        n_samples: n,
        max,
        min,
        mean,
        median,
        std,
        variance,
        n_peaks,
        slope,
        mean_succ_diff,
        mean_abs_succ_diff,
    })
}

/// Concatenated statistics of each roster signal, in roster order. When
/// `cutoff` is given the record is sliced there first.
pub fn featurize_event_group(
    record: &PatientRecord,
    roster: &[String],
    cutoff: Option<Timestamp>,
) -> Result<Vec<f64>> {
    let sliced;
    let rec = match cutoff {
        Some(t) => {
            sliced = record.slice(t)?;
            &sliced
        }
        None => record,
    };
    let mut out = Vec::with_capacity(roster.len() * N_SIGNAL_FEATURES);
    for name in roster {
        let stats = match rec.event_streams.get(name) {
            Some(points) => featurize_signal(points)?,
            None => SignalStats::default(),
        };
        out.extend_from_slice(&stats.to_array());
    }
    Ok(out)
}

/// Raw roster-ordered values of tabular fields; absent fields are zero.
pub fn featurize_tabular(record: &PatientRecord, roster: &[String]) -> Vec<f64> {
    roster
        .iter()
        .map(|f| record.tabular_fields.get(f).copied().unwrap_or(0.0))
        .collect()
}
