//! Label sources for active learning: an error-free simulated oracle and a
//! human expert reached through a shared [`LabelHub`].
//!
//! The hub holds the two queues between the training thread and the HTTP
//! service (queries out, verdicts in) plus a read-only status snapshot.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{now_millis, simulated_oracle, ActiveError, LabelRecord, LabelSource, QueryItem, QueryStatus, Verdict};
use crate::data::TimeSeries;
use crate::env::Environment;

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error("journal {path}: {source}")]
    Journal { path: PathBuf, source: std::io::Error },
    #[error("journal {path} line {line}: {message}")]
    JournalCorrupt { path: PathBuf, line: usize, message: String },
}

/// Outcome of posting a verdict to the hub.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SubmitError {
    #[error("unknown query id {0}")]
    Unknown(u64),
    #[error("query {0} is no longer pending")]
    Conflict(u64),
}

/// A pending query as served to the labeling UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireQuery {
    pub query_id: u64,
    pub series_id: String,
    pub window_start: usize,
    /// Inclusive.
    pub window_end: usize,
    pub window_values: Vec<f64>,
    pub context_before: Vec<f64>,
    pub context_after: Vec<f64>,
    pub created_at: u64,
    pub status: QueryStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStatus {
    pub episode: usize,
    pub epoch: usize,
    pub pending: usize,
    pub labels_consumed: usize,
    pub train_metrics: Option<TrainMetrics>,
    pub blocked: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum JournalEntry {
    Answer { query_id: u64, verdict: Verdict, answered_at: u64 },
    Drained { query_id: u64 },
}

#[derive(Debug, Default)]
struct HubState {
    pending: IndexMap<u64, WireQuery>,
    settled: HashMap<u64, QueryStatus>,
    answers: VecDeque<LabelRecord>,
    drained: HashSet<u64>,
    status: RunStatus,
    series: IndexMap<String, Vec<f64>>,
    journal: Option<(PathBuf, File)>,
}

impl HubState {
    fn append(&mut self, entry: &JournalEntry) -> Result<(), LabelingError> {
        if let Some((path, file)) = self.journal.as_mut() {
            let line = serde_json::to_string(entry).expect("journal entries serialize");
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|source| LabelingError::Journal {
                    path: path.clone(),
                    source,
                })?;
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct LabelHub {
    state: Mutex<HubState>,
    changed: Condvar,
}

impl LabelHub {
    pub fn new() -> Self {
        Self::default()
    }

    /// A hub whose answers are persisted append-only to `path`. Answers
    /// already in the journal but never drained are queued again; drained
    /// ones are remembered so they are never applied twice.
    pub fn with_journal(path: &Path) -> Result<Self, LabelingError> {
        let io_err = |source| LabelingError::Journal {
            path: path.to_path_buf(),
            source,
        };
        let mut state = HubState::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            let mut answers: IndexMap<u64, LabelRecord> = IndexMap::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: JournalEntry = serde_json::from_str(&line).map_err(|e| LabelingError::JournalCorrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                match entry {
                    JournalEntry::Answer {
                        query_id,
                        verdict,
                        answered_at,
                    } => {
                        answers.entry(query_id).or_insert(LabelRecord {
                            query_id,
                            verdict,
                            source: LabelSource::Human,
                            answered_at,
                        });
                    }
                    JournalEntry::Drained { query_id } => {
                        state.drained.insert(query_id);
                    }
                }
            }
            for (id, record) in answers {
                state.settled.insert(id, QueryStatus::Answered);
                if !state.drained.contains(&id) {
                    state.answers.push_back(record);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        state.journal = Some((path.to_path_buf(), file));
        Ok(Self {
            state: Mutex::new(state),
            changed: Condvar::new(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn register_series(&self, id: impl Into<String>, values: Vec<f64>) {
        self.lock().series.insert(id.into(), values);
    }

    /// Values of series `id` in `[from, to)`, clamped to the series length.
    pub fn series_range(&self, id: &str, from: usize, to: usize) -> Option<Vec<f64>> {
        let state = self.lock();
        let values = state.series.get(id)?;
        let to = to.min(values.len());
        let from = from.min(to);
        Some(values[from..to].to_vec())
    }

    pub fn publish(&self, queries: Vec<WireQuery>) {
        let mut state = self.lock();
        for q in queries {
            state.pending.insert(q.query_id, q);
        }
        self.changed.notify_all();
    }

    /// Pending queries, oldest first.
    pub fn pending(&self) -> Vec<WireQuery> {
        self.lock().pending.values().cloned().collect()
    }

    /// Records a verdict for a pending query and queues it for the trainer.
    pub fn submit(&self, query_id: u64, verdict: Verdict) -> Result<Result<LabelRecord, SubmitError>, LabelingError> {
        let mut state = self.lock();
        if state.settled.contains_key(&query_id) {
            return Ok(Err(SubmitError::Conflict(query_id)));
        }
        if !state.pending.contains_key(&query_id) {
            return Ok(Err(SubmitError::Unknown(query_id)));
        }
        let record = LabelRecord {
            query_id,
            verdict,
            source: LabelSource::Human,
            answered_at: now_millis(),
        };
        state.append(&JournalEntry::Answer {
            query_id,
            verdict,
            answered_at: record.answered_at,
        })?;
        state.pending.shift_remove(&query_id);
        state.settled.insert(query_id, QueryStatus::Answered);
        state.answers.push_back(record.clone());
        self.changed.notify_all();
        Ok(Ok(record))
    }

    /// Takes every queued answer not drained before, deduplicated by id.
    pub fn drain_answers(&self) -> Result<Vec<LabelRecord>, LabelingError> {
        let mut state = self.lock();
        let mut out = Vec::new();
        while let Some(r) = state.answers.pop_front() {
            if state.drained.insert(r.query_id) {
                state.append(&JournalEntry::Drained { query_id: r.query_id })?;
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Blocks until none of `ids` is pending or `timeout` elapses. Returns
    /// the ids still pending.
    pub fn wait_for(&self, ids: &[u64], timeout: Duration) -> Vec<u64> {
        let deadline = Instant::now() + timeout;
        let mut state = self.lock();
        loop {
            let open: Vec<u64> = ids.iter().copied().filter(|id| state.pending.contains_key(id)).collect();
            let now = Instant::now();
            if open.is_empty() || now >= deadline {
                return open;
            }
            state = self
                .changed
                .wait_timeout(state, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn expire(&self, ids: &[u64]) {
        let mut state = self.lock();
        for id in ids {
            if state.pending.shift_remove(id).is_some() {
                state.settled.insert(*id, QueryStatus::Expired);
            }
        }
        self.changed.notify_all();
    }

    pub fn status(&self) -> RunStatus {
        let state = self.lock();
        let mut status = state.status.clone();
        status.pending = state.pending.len();
        status
    }

    pub fn update_status(&self, f: impl FnOnce(&mut RunStatus)) {
        let mut state = self.lock();
        f(&mut state.status);
        self.changed.notify_all();
    }
}

/// Answers collected at an episode boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected {
    pub records: Vec<LabelRecord>,
    pub expired: Vec<u64>,
}

pub trait Oracle {
    fn source(&self) -> LabelSource;

    /// Hands freshly selected queries to the label source.
    fn submit(&mut self, items: &[QueryItem], env: &Environment) -> Result<(), LabelingError>;

    /// Returns the answers available at this boundary, blocking if the
    /// source requires it.
    fn collect(&mut self) -> Result<Collected, LabelingError>;

    fn publish_status(&mut self, _status: &RunStatus) {}
}

/// Answers every query from ground truth.
#[derive(Debug, Default)]
pub struct SimulatedOracle {
    queue: Vec<LabelRecord>,
}

impl SimulatedOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Oracle for SimulatedOracle {
    fn source(&self) -> LabelSource {
        LabelSource::Simulated
    }

    fn submit(&mut self, items: &[QueryItem], env: &Environment) -> Result<(), LabelingError> {
        for item in items {
            self.queue.push(simulated_oracle(item, env)?);
        }
        Ok(())
    }

    fn collect(&mut self) -> Result<Collected, LabelingError> {
        Ok(Collected {
            records: std::mem::take(&mut self.queue),
            expired: Vec::new(),
        })
    }
}

/// Publishes queries to a [`LabelHub`] and waits for an expert to answer.
#[derive(Debug)]
pub struct HumanOracle {
    hub: Arc<LabelHub>,
    series_ids: Vec<String>,
    window: usize,
    timeout: Duration,
    outstanding: Vec<u64>,
}

impl HumanOracle {
    /// `series[i]` is the display copy of training series `i`.
    pub fn new(hub: Arc<LabelHub>, series: &[TimeSeries], window: usize, timeout: Duration) -> Self {
        for s in series {
            hub.register_series(s.id.clone(), s.values.clone());
        }
        Self {
            hub,
            series_ids: series.iter().map(|s| s.id.clone()).collect(),
            window,
            timeout,
            outstanding: Vec::new(),
        }
    }

    pub fn hub(&self) -> &Arc<LabelHub> {
        &self.hub
    }

    fn wire(&self, item: &QueryItem) -> WireQuery {
        let series_id = self
            .series_ids
            .get(item.window.series)
            .cloned()
            .unwrap_or_else(|| item.window.series.to_string());
        let start = item.window.start;
        let end = start + self.window - 1;
        let span = 2 * self.window;
        let ctx = |from: usize, to: usize| self.hub.series_range(&series_id, from, to).unwrap_or_default();
        let window_values = self
            .hub
            .series_range(&series_id, start, end + 1)
            .filter(|v| v.len() == self.window)
            .unwrap_or_else(|| item.values.clone());
        WireQuery {
            query_id: item.query_id,
            window_start: start,
            window_end: end,
            window_values,
            context_before: ctx(start.saturating_sub(span), start),
            context_after: ctx(end + 1, end + 1 + span),
            created_at: now_millis(),
            status: QueryStatus::Pending,
            series_id,
        }
    }
}

impl Oracle for HumanOracle {
    fn source(&self) -> LabelSource {
        LabelSource::Human
    }

    fn submit(&mut self, items: &[QueryItem], _env: &Environment) -> Result<(), LabelingError> {
        let wires: Vec<WireQuery> = items.iter().map(|i| self.wire(i)).collect();
        self.outstanding.extend(items.iter().map(|i| i.query_id));
        self.hub.publish(wires);
        Ok(())
    }

    fn collect(&mut self) -> Result<Collected, LabelingError> {
        let mut expired = Vec::new();
        if !self.outstanding.is_empty() {
            self.hub.update_status(|s| s.blocked = true);
            expired = self.hub.wait_for(&self.outstanding, self.timeout);
            self.hub.expire(&expired);
            self.hub.update_status(|s| s.blocked = false);
            self.outstanding.clear();
        }
        Ok(Collected {
            records: self.hub.drain_answers()?,
            expired,
        })
    }

    fn publish_status(&mut self, status: &RunStatus) {
        let blocked = self.hub.status().blocked;
        self.hub.update_status(|s| {
            *s = status.clone();
            s.blocked = blocked;
        });
    }
}
