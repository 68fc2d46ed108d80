//! Corpus ingestion, preprocessing and the synthetic generator.

mod csvio;
mod prep;
mod synth;

pub use csvio::{load_kpi_csv, load_yahoo_dir, load_yahoo_file, write_yahoo_dir, write_yahoo_file, LoadedCorpus};
pub use prep::{normalize, split_train_test, window_extract, window_truth_brute_force, NormStats};
pub use synth::{synth_corpus, synth_generate, AnomalyKinds, BasePattern, SynthSpec};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: csv error: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: missing or wrong header, expected `{expected}`")]
    MissingHeader { path: PathBuf, expected: String },
    #[error("{path}: line {line}: column `{column}` has invalid value `{value}`")]
    BadCell {
        path: PathBuf,
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("{path}: line {line}: timestamp {timestamp} does not increase")]
    NonMonotone { path: PathBuf, line: u64, timestamp: i64 },
    #[error("{path}: line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { path: PathBuf, line: u64, timestamp: i64 },
    #[error("series `{id}`: {detail}")]
    InvalidSeries { id: String, detail: String },
    #[error("series `{id}` has {actual} points, need at least {needed}")]
    TooShort { id: String, needed: usize, actual: usize },
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("invalid synthetic spec: {0}")]
    InvalidSynth(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One univariate series with optional point labels (true = anomalous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    pub labels: Option<Vec<bool>>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, timestamps: Vec<i64>, values: Vec<f64>, labels: Option<Vec<bool>>) -> Result<Self> {
        let series = Self {
            id: id.into(),
            timestamps,
            values,
            labels,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |detail: String| DataError::InvalidSeries {
            id: self.id.clone(),
            detail,
        };
        if self.timestamps.len() != self.values.len() {
            return Err(invalid(format!(
                "{} timestamps but {} values",
                self.timestamps.len(),
                self.values.len()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.values.len() {
                return Err(invalid(format!("{} labels but {} values", labels.len(), self.values.len())));
            }
        }
        if let Some(i) = self.timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!("timestamps not strictly increasing at index {}", i + 1)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&b| b).count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub series: usize,
    pub points: usize,
    pub anomalies: usize,
}

impl CorpusSummary {
    pub fn of(series: &[TimeSeries]) -> Self {
        Self {
            series: series.len(),
            points: series.iter().map(TimeSeries::len).sum(),
            anomalies: series.iter().map(TimeSeries::anomaly_count).sum(),
        }
    }
}
