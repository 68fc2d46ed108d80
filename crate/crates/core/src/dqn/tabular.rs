use super::{DqnError, Result};

/// Tabular action values over a small discrete state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    table: Vec<[f64; 2]>,
}

impl TabularQ {
    pub fn new(states: usize) -> Self {
        Self {
            table: vec![[0.0; 2]; states],
        }
    }

    pub fn states(&self) -> usize {
        self.table.len()
    }

    pub fn get(&self, state: usize, action: usize) -> Result<f64> {
        self.table
            .get(state)
            .map(|row| row[action])
            .ok_or(DqnError::UnknownState(state))
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        let row = self.table.get_mut(state).ok_or(DqnError::UnknownState(state))?;
        row[action] = value;
        Ok(())
    }

    /// `Q(s,a) ← (1 − α)·Q(s,a) + α·(r + γ·max_a' Q(s',a'))`; a terminal
    /// `next` of `None` drops the bootstrap term.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next: Option<usize>, alpha: f64, gamma: f64) -> Result<f64> {
        let bootstrap = match next {
            Some(n) => {
                let row = self.table.get(n).ok_or(DqnError::UnknownState(n))?;
                row[0].max(row[1])
            }
            None => 0.0,
        };
        let target = reward + gamma * bootstrap;
        let q = self.get(state, action)?;
        let updated = (1.0 - alpha) * q + alpha * target;
        self.set(state, action, updated)?;
        Ok(updated)
    }

    pub fn table(&self) -> &[[f64; 2]] {
        &self.table
    }
}

/// Deterministic MDP with two actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMdp {
    pub rewards: Vec<[f64; 2]>,
    pub next: Vec<[usize; 2]>,
    pub gamma: f64,
}

impl ToyMdp {
    /// Two states, two actions; action 1 moves to the other state.
    pub fn two_state() -> Self {
        Self {
            rewards: vec![[0.0, 1.0], [2.0, -1.0]],
            next: vec![[0, 1], [1, 0]],
            gamma: 0.9,
        }
    }

    pub fn states(&self) -> usize {
        self.rewards.len()
    }

    /// Runs `sweeps` passes of tabular updates over every (s, a) pair.
    pub fn q_learning(&self, alpha: f64, sweeps: usize) -> Result<TabularQ> {
        let mut q = TabularQ::new(self.states());
        for _ in 0..sweeps {
            for s in 0..self.states() {
                for a in 0..2 {
                    q.update(s, a, self.rewards[s][a], Some(self.next[s][a]), alpha, self.gamma)?;
                }
            }
        }
        Ok(q)
    }
}

/// Optimal action values by repeated Bellman optimality backups until the
/// largest change drops below `tol`.
pub fn value_iteration(mdp: &ToyMdp, tol: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; mdp.states()];
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<[f64; 2]> = (0..mdp.states())
            .map(|s| {
                std::array::from_fn(|a| {
                    let n = mdp.next[s][a];
                    let v = mdp.rewards[s][a] + mdp.gamma * q[n][0].max(q[n][1]);
                    delta = delta.max((v - q[s][a]).abs());
                    v
                })
            })
            .collect();
        q = next;
        if delta < tol {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_update_arithmetic() {
        let mut q = TabularQ::new(2);
        assert!((q.update(0, 1, 1.0, None, 0.1, 0.9).unwrap() - 0.1).abs() < 1e-15);
        let mut q = TabularQ::new(2);
        q.set(1, 0, 3.0).unwrap();
        assert_eq!(q.update(0, 0, 0.5, Some(1), 1.0, 0.5).unwrap(), 0.5 + 0.5 * 3.0);
    }

    #[test]
    fn matches_increment_form() {
        let (q, r, g, alpha, m) = (0.3, 1.2, 0.8, 0.25, 2.0);
        let mut t = TabularQ::new(2);
        t.set(0, 0, q).unwrap();
        t.set(1, 1, m).unwrap();
        let updated = t.update(0, 0, r, Some(1), alpha, g).unwrap();
        let increment = q + alpha * (r + g * m - q);
        assert!((updated - increment).abs() < 1e-15);
    }

    #[test]
    fn bandit_identity() {
        let mut q = TabularQ::new(3);
        q.set(2, 0, 9.0).unwrap();
        assert_eq!(q.update(1, 1, -0.75, Some(2), 1.0, 0.0).unwrap(), -0.75);
    }

    #[test]
    fn unknown_state_is_an_error() {
        let mut q = TabularQ::new(2);
        assert_eq!(q.update(5, 0, 0.0, None, 0.1, 0.9).unwrap_err(), DqnError::UnknownState(5));
        assert_eq!(q.update(0, 0, 0.0, Some(7), 0.1, 0.9).unwrap_err(), DqnError::UnknownState(7));
    }

    #[test]
    fn converges_to_value_iteration() {
        let mdp = ToyMdp::two_state();
        let optimal = value_iteration(&mdp, 1e-13);
        // Closed form: staying in state 1 earns 2 forever, so V(1) = 20 and
        // Q(0,1) = 1 + 0.9·20.
        assert!((optimal[1][0] - 20.0).abs() < 1e-9);
        assert!((optimal[0][1] - 19.0).abs() < 1e-9);
        let learned = mdp.q_learning(0.5, 10_000).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!((learned.table()[s][a] - optimal[s][a]).abs() < 1e-6);
            }
        }
    }
}
