//! Weakly supervised time-series anomaly detection with a DQN agent, a VAE
//! intrinsic reward, and margin-sampling active learning.

pub mod active;
pub mod data;
pub mod dqn;
pub mod env;
pub mod labeling;
pub mod nn;
pub mod trainer;
pub mod vae;

pub use active::{LabelRecord, QueryBudget, QueryItem, Strategy, Verdict};
pub use data::{CorpusSummary, SynthSpec, TimeSeries};
pub use dqn::{AgentConfig, DqnAgent, InputMode, QNetwork, ReplayMemory, Transition};
pub use env::{Action, Environment, Partition, WindowId, WindowState};
pub use labeling::{HumanOracle, LabelHub, Oracle, RunStatus, SimulatedOracle, WireQuery};
pub use trainer::{EvalReport, RunConfig, TrainError};
pub use vae::{VaeConfig, VaeModel};
