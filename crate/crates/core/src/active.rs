//! Uncertainty-based query selection and label bookkeeping.

use std::collections::HashSet;
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, Partition, WindowId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActiveError {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown query id {0}")]
    UnknownQuery(u64),
    #[error("query {0} was already answered or expired")]
    DuplicateAnswer(u64),
    #[error("window {0} has no ground truth")]
    MissingTruth(WindowId),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub type Result<T> = std::result::Result<T, ActiveError>;

pub fn margin_score(q0: f64, q1: f64) -> f64 {
    (q0 - q1).abs()
}

/// `1 − p̂` for the probability of the predicted class.
pub fn least_confidence_score(p_hat: f64) -> f64 {
    1.0 - p_hat
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy_score(p: &[f64]) -> Result<f64> {
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(ActiveError::InvalidDistribution(format!("negative or non-finite entry in {p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ActiveError::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(-p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
}

/// Softmax over `(q0, q1)`.
pub fn softmax2(q: [f64; 2]) -> [f64; 2] {
    let m = q[0].max(q[1]);
    let e0 = (q[0] - m).exp();
    let e1 = (q[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Margin,
    LeastConfidence,
    Entropy,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Margin, Strategy::LeastConfidence, Strategy::Entropy, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Margin => "margin",
            Strategy::LeastConfidence => "least_confidence",
            Strategy::Entropy => "entropy",
            Strategy::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Strategy::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBudget {
    /// Queries issued per episode.
    pub k: usize,
    pub strategy: Strategy,
}

/// An unlabeled window scored by the current Q-network.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub window: WindowId,
    pub q: [f64; 2],
}

/// Informativeness under `strategy`, oriented so that larger is more
/// informative. Margin is negated.
fn informativeness(strategy: Strategy, q: [f64; 2]) -> f64 {
    match strategy {
        Strategy::Margin => -margin_score(q[0], q[1]),
        Strategy::LeastConfidence => {
            let p = softmax2(q);
            least_confidence_score(p[0].max(p[1]))
        }
        Strategy::Entropy => {
            let p = softmax2(q);
            -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
        }
        Strategy::Random => 0.0,
    }
}

/// Indices into `candidates` of the `k` most informative windows, most
/// informative first. Ties go to the earlier window. Random draws without
/// replacement.
pub fn select_queries<R: Rng + ?Sized>(candidates: &[Candidate], budget: QueryBudget, rng: &mut R) -> Vec<usize> {
    let k = budget.k.min(candidates.len());
    if k == 0 {
        return Vec::new();
    }
    if budget.strategy == Strategy::Random {
        return rand::seq::index::sample(rng, candidates.len(), k).into_vec();
    }
    let scores: Vec<f64> = candidates.iter().map(|c| informativeness(budget.strategy, c.q)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| candidates[a].window.cmp(&candidates[b].window))
    });
    order.truncate(k);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryStatus {
    Pending,
    Answered,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Anomaly,
    Normal,
}

impl Verdict {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "anomaly" => Some(Verdict::Anomaly),
            "normal" => Some(Verdict::Normal),
            _ => None,
        }
    }

    pub fn partition(self) -> Partition {
        match self {
            Verdict::Anomaly => Partition::LabeledAnomalous,
            Verdict::Normal => Partition::LabeledNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Simulated,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub query_id: u64,
    pub window: WindowId,
    pub values: Vec<f64>,
    pub q0: f64,
    pub q1: f64,
    pub margin: f64,
    pub status: QueryStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub query_id: u64,
    pub verdict: Verdict,
    pub source: LabelSource,
    /// Milliseconds since the Unix epoch.
    pub answered_at: u64,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Error-free stand-in for the expert: anomaly iff any point of the window
/// is labeled anomalous.
pub fn simulated_oracle(item: &QueryItem, env: &Environment) -> Result<LabelRecord> {
    let truth = env
        .window(item.window)?
        .is_anomalous()
        .ok_or(ActiveError::MissingTruth(item.window))?;
    Ok(LabelRecord {
        query_id: item.query_id,
        verdict: if truth { Verdict::Anomaly } else { Verdict::Normal },
        source: LabelSource::Simulated,
        answered_at: now_millis(),
    })
}

/// Every query issued during a run, keyed by id in issue order.
#[derive(Debug, Clone, Default)]
pub struct QueryBook {
    items: IndexMap<u64, QueryItem>,
    queried: HashSet<WindowId>,
    next_id: u64,
    answered: usize,
}

impl QueryBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scores every unlabeled, never-queried window with `q_of` and issues
    /// up to `budget.k` new queries.
    pub fn issue<R, F, E>(&mut self, env: &Environment, budget: QueryBudget, mut q_of: F, rng: &mut R) -> std::result::Result<Vec<QueryItem>, E>
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> std::result::Result<[f64; 2], E>,
    {
        if budget.k == 0 {
            return Ok(Vec::new());
        }
        let pool: Vec<&crate::env::WindowState> = env
            .windows()
            .iter()
            .filter(|w| w.partition == Partition::Unlabeled && !self.queried.contains(&w.id))
            .collect();
        let mut candidates = Vec::with_capacity(pool.len());
        for w in &pool {
            candidates.push(Candidate {
                window: w.id,
                q: q_of(&w.values)?,
            });
        }
        let chosen = select_queries(&candidates, budget, rng);
        let mut out = Vec::with_capacity(chosen.len());
        for i in chosen {
            let c = &candidates[i];
            let item = QueryItem {
                query_id: self.next_id,
                window: c.window,
                values: pool[i].values.clone(),
                q0: c.q[0],
                q1: c.q[1],
                margin: margin_score(c.q[0], c.q[1]),
                status: QueryStatus::Pending,
            };
            self.next_id += 1;
            self.queried.insert(c.window);
            self.items.insert(item.query_id, item.clone());
            out.push(item);
        }
        Ok(out)
    }

    pub fn get(&self, id: u64) -> Option<&QueryItem> {
        self.items.get(&id)
    }

    pub fn items(&self) -> impl Iterator<Item = &QueryItem> {
        self.items.values()
    }

    pub fn pending(&self) -> usize {
        self.items.values().filter(|q| q.status == QueryStatus::Pending).count()
    }

    pub fn answered(&self) -> usize {
        self.answered
    }

    pub fn was_queried(&self, id: WindowId) -> bool {
        self.queried.contains(&id)
    }

    /// Marks pending queries as expired. Unknown or settled ids are ignored.
    pub fn expire(&mut self, ids: &[u64]) {
        for id in ids {
            if let Some(item) = self.items.get_mut(id) {
                if item.status == QueryStatus::Pending {
                    item.status = QueryStatus::Expired;
                }
            }
        }
    }

    /// Applies answers to the environment's partitions. Validates the whole
    /// batch before touching anything.
    pub fn incorporate(&mut self, records: &[LabelRecord], env: &mut Environment) -> Result<usize> {
        let mut seen = HashSet::new();
        for r in records {
            let item = self.items.get(&r.query_id).ok_or(ActiveError::UnknownQuery(r.query_id))?;
            if item.status != QueryStatus::Pending || !seen.insert(r.query_id) {
                return Err(ActiveError::DuplicateAnswer(r.query_id));
            }
            if env.partition(item.window)? != Partition::Unlabeled {
                return Err(ActiveError::Env(EnvError::AlreadyLabeled {
                    id: item.window,
                    partition: env.partition(item.window)?,
                }));
            }
        }
        for r in records {
            let item = self.items.get_mut(&r.query_id).expect("validated above");
            env.relabel(item.window, r.verdict.partition())?;
            item.status = QueryStatus::Answered;
            self.answered += 1;
        }
        Ok(records.len())
    }
}
