//! The detection MDP: sliding-window states, label partitions, and the
//! reward signal.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("series {0} has no windows")]
    EmptySeries(usize),
    #[error("unknown series index {0}")]
    UnknownSeries(usize),
    #[error("unknown window {0}")]
    UnknownWindow(WindowId),
    #[error("window {id} is already labeled as {partition:?}")]
    AlreadyLabeled { id: WindowId, partition: Partition },
    #[error("cannot relabel window {0} as unlabeled")]
    InvalidRelabel(WindowId),
    #[error("step called after the episode finished")]
    StepAfterDone,
    #[error("no episode in progress; call reset first")]
    NotStarted,
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Label partition a window belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    /// Known anomaly (D_la).
    LabeledAnomalous,
    /// Label unknown to the agent (D_u).
    Unlabeled,
    /// Confirmed normal by an oracle answer.
    LabeledNormal,
}

/// The two detector actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    /// a0
    Normal,
    /// a1
    Anomaly,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Normal, Action::Anomaly];

    pub fn index(self) -> usize {
        match self {
            Action::Normal => 0,
            Action::Anomaly => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Normal
        } else {
            Action::Anomaly
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowId {
    pub series: usize,
    pub start: usize,
}

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.series, self.start)
    }
}

/// One state: a normalized window and the partition it held when emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    pub id: WindowId,
    pub values: Vec<f64>,
    pub partition: Partition,
    /// Point labels, kept for the simulated oracle and evaluation only.
    pub truth: Option<Vec<bool>>,
}

impl WindowState {
    /// A window is anomalous when any of its points is.
    pub fn is_anomalous(&self) -> Option<bool> {
        self.truth.as_ref().map(|t| t.iter().any(|&b| b))
    }
}

/// Piecewise extrinsic reward: +1 for flagging a known anomaly, 0 for
/// passing an unlabeled window, −1 otherwise. Oracle-confirmed normals
/// reward a0 with +1 and a1 with −1.
pub fn extrinsic_reward(partition: Partition, action: Action) -> f64 {
    match (partition, action) {
        (Partition::LabeledAnomalous, Action::Anomaly) => 1.0,
        (Partition::Unlabeled, Action::Normal) => 0.0,
        (Partition::LabeledNormal, Action::Normal) => 1.0,
        _ => -1.0,
    }
}

pub fn combined_reward(extrinsic: f64, intrinsic: f64) -> f64 {
    extrinsic + intrinsic
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` is the terminal marker.
    pub next: Option<WindowState>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub anomalous: usize,
    pub unlabeled: usize,
    pub normal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Episode {
    series: usize,
    cursor: usize,
}

/// All training windows, their mutable partitions, and the active episode.
///
/// Windows are stored series by series in temporal order; an episode walks
/// one series from its first window to its last.
#[derive(Debug, Clone)]
pub struct Environment {
    windows: Vec<WindowState>,
    series_ranges: Vec<Range<usize>>,
    index: HashMap<WindowId, usize>,
    window_len: usize,
    stride: usize,
    episode: Option<Episode>,
}

impl Environment {
    /// `per_series[i]` holds the windows of series `i` in temporal order.
    pub fn new(per_series: Vec<Vec<WindowState>>, window_len: usize, stride: usize) -> Self {
        let mut windows = Vec::new();
        let mut series_ranges = Vec::with_capacity(per_series.len());
        for ws in per_series {
            let start = windows.len();
            windows.extend(ws);
            series_ranges.push(start..windows.len());
        }
        let index = windows.iter().enumerate().map(|(i, w)| (w.id, i)).collect();
        Self {
            windows,
            series_ranges,
            index,
            window_len,
            stride,
            episode: None,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn series_count(&self) -> usize {
        self.series_ranges.len()
    }

    pub fn windows(&self) -> &[WindowState] {
        &self.windows
    }

    pub fn series_windows(&self, series: usize) -> Result<&[WindowState]> {
        let range = self.series_ranges.get(series).ok_or(EnvError::UnknownSeries(series))?;
        Ok(&self.windows[range.clone()])
    }

    pub fn window(&self, id: WindowId) -> Result<&WindowState> {
        self.index
            .get(&id)
            .map(|&i| &self.windows[i])
            .ok_or(EnvError::UnknownWindow(id))
    }

    pub fn partition(&self, id: WindowId) -> Result<Partition> {
        self.window(id).map(|w| w.partition)
    }

    pub fn counts(&self) -> PartitionCounts {
        let mut c = PartitionCounts::default();
        for w in &self.windows {
            match w.partition {
                Partition::LabeledAnomalous => c.anomalous += 1,
                Partition::Unlabeled => c.unlabeled += 1,
                Partition::LabeledNormal => c.normal += 1,
            }
        }
        c
    }

    /// Selects the series for the next episode and resets onto it.
    pub fn begin_episode(&mut self, series: usize) -> Result<WindowState> {
        let range = self.series_ranges.get(series).ok_or(EnvError::UnknownSeries(series))?;
        if range.is_empty() {
            return Err(EnvError::EmptySeries(series));
        }
        self.episode = Some(Episode { series, cursor: 0 });
        self.reset()
    }

    /// Rewinds the current episode to its first window.
    pub fn reset(&mut self) -> Result<WindowState> {
        let ep = self.episode.as_mut().ok_or(EnvError::NotStarted)?;
        ep.cursor = 0;
        let range = &self.series_ranges[ep.series];
        if range.is_empty() {
            return Err(EnvError::EmptySeries(ep.series));
        }
        Ok(self.windows[range.start].clone())
    }

    pub fn episode_len(&self) -> Option<usize> {
        self.episode.map(|ep| self.series_ranges[ep.series].len())
    }

    pub fn current(&self) -> Result<&WindowState> {
        let ep = self.episode.ok_or(EnvError::NotStarted)?;
        let range = &self.series_ranges[ep.series];
        if ep.cursor >= range.len() {
            return Err(EnvError::StepAfterDone);
        }
        Ok(&self.windows[range.start + ep.cursor])
    }

    /// Scores `action` on the current window, adds `intrinsic`, and advances
    /// the cursor. The next state does not depend on the action.
    pub fn step(&mut self, action: Action, intrinsic: f64) -> Result<StepOutcome> {
        let r1 = extrinsic_reward(self.current()?.partition, action);
        let ep = self.episode.as_mut().ok_or(EnvError::NotStarted)?;
        ep.cursor += 1;
        let range = self.series_ranges[ep.series].clone();
        let done = ep.cursor >= range.len();
        let next = (!done).then(|| self.windows[range.start + ep.cursor].clone());
        Ok(StepOutcome {
            next,
            reward: combined_reward(r1, intrinsic),
            done,
        })
    }

    /// Moves an unlabeled window into a labeled partition.
    pub fn relabel(&mut self, id: WindowId, partition: Partition) -> Result<()> {
        if partition == Partition::Unlabeled {
            return Err(EnvError::InvalidRelabel(id));
        }
        let &i = self.index.get(&id).ok_or(EnvError::UnknownWindow(id))?;
        let current = self.windows[i].partition;
        if current != Partition::Unlabeled {
            return Err(EnvError::AlreadyLabeled { id, partition: current });
        }
        self.windows[i].partition = partition;
        Ok(())
    }

    /// Puts `round(fraction × anomalous windows)` truly anomalous windows,
    /// chosen uniformly, into the labeled-anomalous partition. Returns how
    /// many were labeled.
    pub fn seed_labeled_anomalies<R: Rng + ?Sized>(&mut self, fraction: f64, rng: &mut R) -> usize {
        let mut candidates: Vec<usize> = self
            .windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.partition == Partition::Unlabeled && w.is_anomalous() == Some(true))
            .map(|(i, _)| i)
            .collect();
        let take = ((fraction.clamp(0.0, 1.0) * candidates.len() as f64).round() as usize).min(candidates.len());
        candidates.shuffle(rng);
        for &i in &candidates[..take] {
            self.windows[i].partition = Partition::LabeledAnomalous;
        }
        take
    }

    /// Number of truly anomalous windows (ground truth permitting).
    pub fn anomalous_truth_count(&self) -> usize {
        self.windows.iter().filter(|w| w.is_anomalous() == Some(true)).count()
    }

    /// Windows that do not overlap, in time, any labeled-anomalous window
    /// of the same series.
    pub fn normal_pool(&self) -> Vec<&WindowState> {
        let mut out = Vec::new();
        for range in &self.series_ranges {
            let windows = &self.windows[range.clone()];
            let span = windows.iter().map(|w| w.id.start + self.window_len).max().unwrap_or(0);
            let mut covered = vec![0i64; span + 1];
            for w in windows.iter().filter(|w| w.partition == Partition::LabeledAnomalous) {
                covered[w.id.start] += 1;
                covered[w.id.start + self.window_len] -= 1;
            }
            // prefix sums give per-point coverage, then a second prefix for range queries
            let mut depth = 0i64;
            let mut hits = vec![0usize; span + 1];
            for t in 0..span {
                depth += covered[t];
                hits[t + 1] = hits[t] + usize::from(depth > 0);
            }
            out.extend(
                windows
                    .iter()
                    .filter(|w| hits[w.id.start + self.window_len] == hits[w.id.start]),
            );
        }
        out
    }
}
