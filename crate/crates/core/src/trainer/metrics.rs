use serde::{Deserialize, Serialize};

use crate::dqn::{greedy_action, make_state_input, InputMode, QNetwork};
use crate::env::{Action, WindowState};
use crate::vae::VaeModel;

use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision(), self.recall())
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Greedy per-window predictions scored against window truth.
pub fn evaluate(net: &QNetwork, vae: &VaeModel, mode: InputMode, windows: &[WindowState]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for w in windows {
        let truth = w.is_anomalous().ok_or(TrainError::UnlabeledTestWindow(w.id))?;
        let input = make_state_input(&w.values, vae, mode)?;
        let q = net.q_values(&input)?;
        c.record(greedy_action(q) == Action::Anomaly, truth);
    }
    Ok(c)
}
