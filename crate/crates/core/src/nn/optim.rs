use serde::{Deserialize, Serialize};

use super::{check_len, NnError, Parameterized, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamSettings {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are shaped on the first update and
/// every later update must present the same parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub settings: AdamSettings,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(settings: AdamSettings) -> Self {
        Self {
            settings,
            first: Vec::new(),
            second: Vec::new(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        check_shapes(&params, grads)?;
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        } else {
            if self.first.len() != grads.len() {
                return Err(NnError::GroupCountMismatch {
                    expected: self.first.len(),
                    actual: grads.len(),
                });
            }
            for (m, g) in self.first.iter().zip(grads) {
                check_len("adam_update moments", m.len(), g.len())?;
            }
        }
        self.t += 1;
        let AdamSettings {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.settings;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                if g[k] == 0.0 && m[k] == 0.0 {
                    continue;
                }
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
    t: u64,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, t: 0 }
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        check_shapes(&params, grads)?;
        self.t += 1;
        for (p, g) in params.into_iter().zip(grads) {
            for (pk, gk) in p.iter_mut().zip(g) {
                *pk -= self.learning_rate * gk;
            }
        }
        Ok(())
    }
}

fn check_shapes(params: &[&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(NnError::GroupCountMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    for (p, g) in params.iter().zip(grads) {
        check_len("optimizer gradient", p.len(), g.len())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(AdamSettings::with_learning_rate(learning_rate))),
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(learning_rate)),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::Adam(a) => a.settings.learning_rate,
            Optimizer::Sgd(s) => s.learning_rate,
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Adam(a) => a.t,
            Optimizer::Sgd(s) => s.t,
        }
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        match self {
            Optimizer::Adam(a) => a.update(params, grads),
            Optimizer::Sgd(s) => s.update(params, grads),
        }
    }

    pub fn apply<P: Parameterized + ?Sized>(&mut self, model: &mut P, grads: &[Vec<f64>]) -> Result<()> {
        self.update(model.params_mut(), grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut adam = Adam::new(AdamSettings::default());
        let mut w = vec![1.0, -2.0, 3.0];
        for _ in 0..5 {
            adam.update(vec![&mut w], &[vec![0.0; 3]]).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut adam = Adam::new(AdamSettings::with_learning_rate(0.01));
        let mut w = vec![0.5, 0.5];
        adam.update(vec![&mut w], &[vec![3.0, -0.2]]).unwrap();
        assert!((w[0] - (0.5 - 0.01)).abs() < 1e-9);
        assert!((w[1] - (0.5 + 0.01)).abs() < 1e-9);
    }

    /// Independent scalar Adam used as the oracle for the quadratic test.
    fn scalar_adam(mut w: f64, lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        w
    }

    #[test]
    fn minimizes_quadratic() {
        let oracle = scalar_adam(1.0, 0.1, 100);
        assert!(oracle.abs() < 0.1);
        let mut adam = Adam::new(AdamSettings::with_learning_rate(0.1));
        let mut w = vec![1.0];
        for _ in 0..100 {
            let g = vec![2.0 * w[0]];
            adam.update(vec![&mut w], &[g]).unwrap();
        }
        assert!(w[0].abs() < 0.1);
        assert!((w[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut adam = Adam::new(AdamSettings::default());
        let mut w = vec![1.0, 2.0];
        assert!(adam.update(vec![&mut w], &[vec![1.0]]).is_err());
        assert!(adam.update(vec![&mut w], &[]).is_err());
        adam.update(vec![&mut w], &[vec![1.0, 1.0]]).unwrap();
        let mut other = vec![1.0];
        assert!(adam.update(vec![&mut other], &[vec![1.0]]).is_err());
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        let mut w = vec![1.0];
        opt.update(vec![&mut w], &[vec![2.0]]).unwrap();
        assert_eq!(w, vec![0.0]);
        assert_eq!(opt.step_count(), 1);
    }
}
