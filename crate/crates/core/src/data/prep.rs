use serde::{Deserialize, Serialize};

use super::{DataError, Result, TimeSeries};
use crate::env::{Partition, WindowId, WindowState};

/// Population mean and standard deviation used for z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn fit(series: &TimeSeries) -> Result<Self> {
        if series.len() < 2 {
            return Err(DataError::TooShort {
                id: series.id.clone(),
                needed: 2,
                actual: series.len(),
            });
        }
        let n = series.len() as f64;
        let mean = series.values.iter().sum::<f64>() / n;
        let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }

    /// Z-scores `series` with these statistics. A zero deviation maps every
    /// value to zero.
    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let values = if self.std > 0.0 {
            series.values.iter().map(|v| (v - self.mean) / self.std).collect()
        } else {
            log::warn!("series `{}` has zero deviation; normalizing to zeros", series.id);
            vec![0.0; series.len()]
        };
        TimeSeries {
            values,
            ..series.clone()
        }
    }
}

/// Z-scores a series with its own statistics.
pub fn normalize(series: &TimeSeries) -> Result<(TimeSeries, NormStats)> {
    let stats = NormStats::fit(series)?;
    Ok((stats.apply(series), stats))
}

/// Temporal prefix/suffix split; the train side gets `round(len × ratio)`
/// points. Both sides must hold at least `min_len` points.
pub fn split_train_test(series: &TimeSeries, ratio: f64, min_len: usize) -> Result<(TimeSeries, TimeSeries)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio(ratio));
    }
    let cut = (series.len() as f64 * ratio).round() as usize;
    let part = |range: std::ops::Range<usize>, suffix: &str| -> Result<TimeSeries> {
        if range.len() < min_len.max(1) {
            return Err(DataError::TooShort {
                id: format!("{}{suffix}", series.id),
                needed: min_len.max(1),
                actual: range.len(),
            });
        }
        Ok(TimeSeries {
            id: series.id.clone(),
            timestamps: series.timestamps[range.clone()].to_vec(),
            values: series.values[range.clone()].to_vec(),
            labels: series.labels.as_ref().map(|l| l[range].to_vec()),
        })
    };
    Ok((part(0..cut, " (train)")?, part(cut..series.len(), " (test)")?))
}

/// Sliding windows of `window` points every `stride` points:
/// `⌊(len − window) / stride⌋ + 1` of them. Windows start out unlabeled and
/// carry their point labels when the series has any.
pub fn window_extract(series: &TimeSeries, series_index: usize, window: usize, stride: usize) -> Result<Vec<WindowState>> {
    if window == 0 || stride == 0 {
        return Err(DataError::InvalidSeries {
            id: series.id.clone(),
            detail: "window and stride must be positive".into(),
        });
    }
    if series.len() < window {
        return Err(DataError::TooShort {
            id: series.id.clone(),
            needed: window,
            actual: series.len(),
        });
    }
    let count = (series.len() - window) / stride + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * stride;
            WindowState {
                id: WindowId {
                    series: series_index,
                    start,
                },
                values: series.values[start..start + window].to_vec(),
                partition: Partition::Unlabeled,
                truth: series.labels.as_ref().map(|l| l[start..start + window].to_vec()),
            }
        })
        .collect())
}

/// Window truth by direct OR over each window's labels; used to cross-check
/// the windowing path.
pub fn window_truth_brute_force(labels: &[bool], window: usize, stride: usize) -> Vec<bool> {
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= labels.len() {
        let mut any = false;
        for &l in &labels[start..start + window] {
            any = any || l;
        }
        out.push(any);
        start += stride;
    }
    out
}
