//! Deep Q-learning: the LSTM Q-network, ε-greedy policy, replay memory, and
//! the Bellman-target learning step.

mod learn;
mod network;
mod replay;
mod tabular;

pub use learn::{learn_step, sync_target, td_loss_and_grads};
pub use network::{make_state_input, InputMode, QNetwork};
pub use replay::{ReplayMemory, Transition};
pub use tabular::{value_iteration, TabularQ, ToyMdp};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Action;
use crate::nn::{NnError, Optimizer, OptimizerKind, Parameterized};
use crate::vae::VaeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DqnError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error("replay memory holds {available} transitions, batch needs {requested}")]
    InsufficientMemory { requested: usize, available: usize },
    #[error("learn_step needs a nonempty batch")]
    EmptyBatch,
    #[error("non-finite TD loss")]
    NonFiniteLoss,
    #[error("unknown tabular state {0}")]
    UnknownState(usize),
}

pub type Result<T> = std::result::Result<T, DqnError>;

/// Linear ε decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            decay_steps: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon: EpsilonSchedule,
    /// Target network sync period in learn steps.
    pub r_sync: u64,
    pub batch_size: usize,
    pub capacity: usize,
    pub hidden: usize,
    pub input_mode: InputMode,
    /// Environment steps between learn steps.
    pub learn_every: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-3,
            epsilon: EpsilonSchedule::default(),
            r_sync: 200,
            batch_size: 32,
            capacity: 10_000,
            hidden: 32,
            input_mode: InputMode::Reconstructed,
            learn_every: 1,
        }
    }
}

/// Greedy choice with probability 1 − ε, uniform otherwise. Ties go to a0.
pub fn select_action<R: Rng + ?Sized>(q: [f64; 2], epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return if rng.random_bool(0.5) { Action::Anomaly } else { Action::Normal };
    }
    greedy_action(q)
}

pub fn greedy_action(q: [f64; 2]) -> Action {
    if q[1] > q[0] {
        Action::Anomaly
    } else {
        Action::Normal
    }
}

/// `r` when terminal, otherwise `r + γ·max_a Q̂(s', a)`.
pub fn td_target(reward: f64, gamma: f64, next_q: Option<[f64; 2]>) -> f64 {
    match next_q {
        None => reward,
        Some(q) => reward + gamma * q[0].max(q[1]),
    }
}

/// Online and target networks plus the replay memory and optimizer they
/// share.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: QNetwork,
    pub target: QNetwork,
    pub memory: ReplayMemory,
    pub optimizer: Optimizer,
    pub config: AgentConfig,
    env_steps: u64,
    learn_steps: u64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, window: usize, rng: &mut R) -> Self {
        let online = QNetwork::random(config.input_mode.channels(), config.hidden, window, rng);
        Self::from_network(config, online)
    }

    pub fn from_network(config: AgentConfig, online: QNetwork) -> Self {
        let target = online.clone();
        Self {
            target,
            memory: ReplayMemory::new(config.capacity),
            optimizer: Optimizer::new(OptimizerKind::Adam, config.learning_rate),
            online,
            config,
            env_steps: 0,
            learn_steps: 0,
        }
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.env_steps)
    }

    /// ε-greedy action for `input` under the current schedule.
    pub fn act<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<(Action, [f64; 2])> {
        let q = self.online.q_values(input)?;
        Ok((select_action(q, self.epsilon(), rng), q))
    }

    /// Stores `t`, then learns and syncs when due. Returns the TD loss of
    /// the learn step if one ran.
    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<f64>> {
        self.memory.push(t);
        self.env_steps += 1;
        let every = self.config.learn_every.max(1);
        if self.memory.len() < self.config.batch_size || self.env_steps % every != 0 {
            return Ok(None);
        }
        let batch = self.memory.sample(self.config.batch_size, rng)?;
        let loss = learn_step(&mut self.online, &self.target, &batch, &mut self.optimizer, self.config.gamma)?;
        self.learn_steps += 1;
        sync_target(&self.online, &mut self.target, self.learn_steps, self.config.r_sync);
        Ok(Some(loss))
    }

    pub fn target_checksum(&self) -> u64 {
        self.target.param_checksum()
    }
}
