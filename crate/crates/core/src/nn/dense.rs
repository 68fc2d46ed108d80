use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, glorot_uniform, sigmoid, NnError, ParamGrads, Parameterized, Result, ValueGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    out: Vec<f64>,
}

/// Fully connected layer `y = act(W·x + b)` with `W` of shape out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: ValueGrid,
    pub bias: Vec<f64>,
    pub activation: Activation,
    cache: Option<DenseCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: ValueGrid,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn into_param_grads(self) -> ParamGrads {
        vec![self.weights.data().to_vec(), self.bias]
    }
}

impl DenseLayer {
    pub fn new(weights: ValueGrid, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        check_len("DenseLayer::new bias", weights.rows(), bias.len())?;
        Ok(Self {
            weights,
            bias,
            activation,
            cache: None,
        })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: ValueGrid::zeros(output, input),
            bias: vec![0.0; output],
            activation,
            cache: None,
        }
    }

    pub fn random<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weights: glorot_uniform(output, input, rng),
            bias: vec![0.0; output],
            activation,
            cache: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                context: "dense_forward",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut z = self.weights.matvec(x)?;
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        Ok(z)
    }

    /// Forward pass without touching the cache.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.pre_activation(x)?;
        Ok(z.into_iter().map(|v| self.activation.apply(v)).collect())
    }

    /// Forward pass that records what `backward` needs.
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let pre = self.pre_activation(x)?;
        let out: Vec<f64> = pre.iter().map(|&v| self.activation.apply(v)).collect();
        self.cache = Some(DenseCache {
            input: x.to_vec(),
            pre,
            out: out.clone(),
        });
        Ok(out)
    }

    /// Gradients of a scalar loss given `dL/dy`. Consumes the cached forward.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<DenseGrads> {
        let cache = self.cache.take().ok_or(NnError::MissingForward("dense"))?;
        check_len("dense_backward", self.output_dim(), upstream.len())?;
        let delta: Vec<f64> = upstream
            .iter()
            .zip(cache.pre.iter().zip(&cache.out))
            .map(|(g, (&z, &y))| g * self.activation.derivative(z, y))
            .collect();
        let mut weights = ValueGrid::zeros(self.output_dim(), self.input_dim());
        weights.add_outer(&delta, &cache.input);
        let input = self.weights.matvec_transposed(&delta)?;
        Ok(DenseGrads {
            input,
            weights,
            bias: delta,
        })
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

impl Parameterized for DenseLayer {
    fn params(&self) -> Vec<&[f64]> {
        vec![self.weights.data(), &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.data_mut(), &mut self.bias]
    }
}
