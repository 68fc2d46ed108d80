use std::collections::VecDeque;

use rand::Rng;

use super::{DqnError, Result};
use crate::env::Action;

/// One `⟨s, a, r, s'⟩` tuple. States are stored as the network inputs seen
/// at acting time; `next = None` marks a terminal transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next: Option<Vec<f64>>,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: Action, reward: f64, next: Option<Vec<f64>>) -> Self {
        Self {
            state,
            action,
            reward,
            next,
        }
    }

    pub fn done(&self) -> bool {
        self.next.is_none()
    }
}

/// Bounded FIFO experience buffer with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    items: VecDeque<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 {
            return Ok(Vec::new());
        }
        if self.items.len() < batch {
            return Err(DqnError::InsufficientMemory {
                requested: batch,
                available: self.items.len(),
            });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
