//! Network performance functionals and learning-curve post-processing.
//!
//! Curves are always averaged across trials in the linear power domain and
//! only then converted to dB.

use crate::error::{Error, Result};

pub const DEFAULT_DB_FLOOR: f64 = 1e-12;

/// Fraction of the run, taken from the end, that counts as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Emse,
    Nr,
}

/// A learning curve indexed by high-rate instant `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub values: Vec<f64>,
    pub trial_count: usize,
    pub kind: MetricKind,
    pub metadata: Vec<(String, String)>,
}

impl MetricSeries {
    pub fn single_trial(kind: MetricKind, values: Vec<f64>) -> Self {
        Self {
            values,
            trial_count: 1,
            kind,
            metadata: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_db(&self, floor: f64) -> Vec<f64> {
        to_db(&self.values, floor)
    }

    pub fn steady_state(&self) -> f64 {
        steady_state(&self.values)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// `(1/N) sum_k (z_k - y_k)^2`.
pub fn network_emse(z: &[f64], y: &[f64]) -> Result<f64> {
    mean_squared_gap(z, y)
}

/// `(1/N) sum_k (d_k - y_k)^2`.
pub fn noise_reduction(d: &[f64], y: &[f64]) -> Result<f64> {
    mean_squared_gap(d, y)
}

fn mean_squared_gap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Argument("no nodes to average over".into()));
    }
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sum / a.len() as f64)
}

/// Pointwise mean over trials. Trials are summed in list order.
pub fn average_trials(series: &[MetricSeries]) -> Result<MetricSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Argument("cannot average an empty trial list".into()))?;
    let len = first.len();
    let mut sum = vec![0.0; len];
    for s in series {
        if s.len() != len {
            return Err(Error::Dimension {
                expected: len,
                actual: s.len(),
            });
        }
        if s.kind != first.kind {
            return Err(Error::Argument("cannot average EMSE and NR curves together".into()));
        }
        sum.iter_mut().zip(&s.values).for_each(|(acc, v)| *acc += v);
    }
    let count = series.len() as f64;
    Ok(MetricSeries {
        values: sum.into_iter().map(|v| v / count).collect(),
        trial_count: series.iter().map(|s| s.trial_count).sum(),
        kind: first.kind,
        metadata: first.metadata.clone(),
    })
}

/// `10 log10(max(v, floor))`.
pub fn to_db(values: &[f64], floor: f64) -> Vec<f64> {
    values.iter().map(|&v| 10.0 * v.max(floor).log10()).collect()
}

/// Centered moving average; windows are truncated at the edges.
pub fn smooth(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Argument("smoothing window must be at least 1".into()));
    }
    let before = (window - 1) / 2;
    let after = window / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    Ok((0..values.len())
        .map(|i| {
            if window == 1 {
                return values[i];
            }
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

/// Mean over the final 10% of the curve (at least one sample).
pub fn steady_state(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let tail = ((values.len() as f64 * STEADY_STATE_FRACTION) as usize).max(1);
    let slice = &values[values.len() - tail..];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// First instant at which the curve drops below `threshold` after having
/// been at or above it.
pub fn convergence_iteration(values: &[f64], threshold: f64) -> Option<usize> {
    let start = values.iter().position(|&v| v >= threshold)?;
    values[start..]
        .iter()
        .position(|&v| v < threshold)
        .map(|i| start + i)
}
