use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Result;
use crate::nn::{check_len, zero_grads, Activation, DenseLayer, ParamGrads, Parameterized};
use crate::nn::LstmCell;
use crate::vae::VaeModel;

/// What the Q-network sees of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMode {
    /// The normalized window itself.
    Raw,
    /// The VAE reconstruction `decode(μ(s))`.
    Reconstructed,
    /// Raw followed by reconstruction; fed to the LSTM as two channels.
    Concat,
}

impl InputMode {
    pub fn channels(self) -> usize {
        match self {
            InputMode::Raw | InputMode::Reconstructed => 1,
            InputMode::Concat => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputMode::Raw => "raw",
            InputMode::Reconstructed => "reconstructed",
            InputMode::Concat => "concat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(InputMode::Raw),
            "reconstructed" => Some(InputMode::Reconstructed),
            "concat" => Some(InputMode::Concat),
            _ => None,
        }
    }
}

pub fn make_state_input(values: &[f64], vae: &VaeModel, mode: InputMode) -> Result<Vec<f64>> {
    Ok(match mode {
        InputMode::Raw => values.to_vec(),
        InputMode::Reconstructed => vae.reconstruct(values)?,
        InputMode::Concat => {
            let mut out = values.to_vec();
            out.extend(vae.reconstruct(values)?);
            out
        }
    })
}

/// LSTM over the window's time steps; the last hidden state feeds a linear
/// head producing `(q0, q1)`.
///
/// Inputs are flat vectors of `channels × window` values laid out channel
/// by channel, so step `t` reads `input[c·window + t]` for each channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub lstm: LstmCell,
    pub head: DenseLayer,
    window: usize,
}

impl QNetwork {
    pub fn random<R: Rng + ?Sized>(channels: usize, hidden: usize, window: usize, rng: &mut R) -> Self {
        Self {
            lstm: LstmCell::random(channels, hidden, rng),
            head: DenseLayer::random(hidden, 2, Activation::Identity, rng),
            window,
        }
    }

    pub fn zeros(channels: usize, hidden: usize, window: usize) -> Self {
        Self {
            lstm: LstmCell::zeros(channels, hidden),
            head: DenseLayer::zeros(hidden, 2, Activation::Identity),
            window,
        }
    }

    pub fn channels(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden_size()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn input_len(&self) -> usize {
        self.channels() * self.window
    }

    fn sequence(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len("q-network input", self.input_len(), input.len())?;
        let w = self.window;
        Ok((0..w)
            .map(|t| (0..self.channels()).map(|c| input[c * w + t]).collect())
            .collect())
    }

    pub fn q_values(&self, input: &[f64]) -> Result<[f64; 2]> {
        let xs = self.sequence(input)?;
        let hsz = self.hidden();
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        for x in &xs {
            let (nh, nc) = self.lstm.step_apply(x, &h, &c)?;
            h = nh;
            c = nc;
        }
        let q = self.head.apply(&h)?;
        Ok([q[0], q[1]])
    }

    /// Forward pass that keeps the intermediates `backward` needs.
    pub fn forward(&mut self, input: &[f64]) -> Result<[f64; 2]> {
        let xs = self.sequence(input)?;
        let hs = self.lstm.forward_sequence(&xs)?;
        let last = hs.last().cloned().unwrap_or_else(|| vec![0.0; self.hidden()]);
        let q = self.head.forward(&last)?;
        Ok([q[0], q[1]])
    }

    /// Parameter gradients for upstream `dL/dq` after `forward`.
    pub fn backward(&mut self, dq: [f64; 2]) -> Result<ParamGrads> {
        let head = self.head.backward(&dq)?;
        let steps = self.lstm.cached_steps();
        let mut grads = if steps == 0 {
            zero_grads(&self.lstm)
        } else {
            let mut upstream = vec![vec![0.0; self.hidden()]; steps];
            upstream[steps - 1] = head.input.clone();
            self.lstm.backward(&upstream)?.params
        };
        grads.extend(head.into_param_grads());
        Ok(grads)
    }

    /// `(input, hidden, window)` dimensions for checkpoint manifests.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels(), self.hidden(), self.window)
    }
}

impl Parameterized for QNetwork {
    fn params(&self) -> Vec<&[f64]> {
        let mut out = self.lstm.params();
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.lstm.params_mut();
        out.extend(self.head.params_mut());
        out
    }
}
