//! Variational autoencoder over window vectors.
//!
//! Gaussian encoder `q(z|x)` with diagonal covariance, standard-normal prior,
//! and a decoder whose likelihood has fixed unit variance, so the negative
//! log-likelihood is `½‖x − x̂‖²` up to a constant. The training loss is the
//! negative evidence lower bound with that constant dropped.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::nn::{
    accumulate, check_len, zero_grads, Activation, DenseLayer, NnError, Optimizer, ParamGrads, Parameterized,
};

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VaeError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite value during {stage}")]
    NonFinite { stage: &'static str },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("pretraining pool is empty")]
    EmptyPool,
}

pub type Result<T> = std::result::Result<T, VaeError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VaeConfig {
    pub window: usize,
    pub latent: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
}

impl VaeConfig {
    /// W → 32 → 16 → (μ, log σ²) with L = 8, decoder mirrored.
    pub fn standard(window: usize) -> Self {
        Self {
            window,
            latent: 8,
            encoder_hidden: vec![32, 16],
            decoder_hidden: vec![16, 32],
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    encoder: Vec<DenseLayer>,
    mu_head: DenseLayer,
    log_var_head: DenseLayer,
    decoder: Vec<DenseLayer>,
    window: usize,
    latent: usize,
}

fn build_stack<F>(input: usize, hidden: &[usize], output: Option<usize>, act: Activation, mut make: F) -> Vec<DenseLayer>
where
    F: FnMut(usize, usize, Activation) -> DenseLayer,
{
    let mut layers = Vec::new();
    let mut prev = input;
    for &h in hidden {
        layers.push(make(prev, h, act));
        prev = h;
    }
    if let Some(out) = output {
        layers.push(make(prev, out, Activation::Identity));
    }
    layers
}

impl VaeModel {
    pub fn random<R: Rng + ?Sized>(config: &VaeConfig, rng: &mut R) -> Self {
        let mut make = |i, o, a| DenseLayer::random(i, o, a, rng);
        Self::build(config, &mut make)
    }

    /// All weights and biases zero: encodes to the prior and decodes to zero.
    pub fn zeros(config: &VaeConfig) -> Self {
        let mut make = DenseLayer::zeros;
        Self::build(config, &mut make)
    }

    fn build(config: &VaeConfig, make: &mut dyn FnMut(usize, usize, Activation) -> DenseLayer) -> Self {
        let encoder = build_stack(config.window, &config.encoder_hidden, None, config.activation, &mut *make);
        let head_in = config.encoder_hidden.last().copied().unwrap_or(config.window);
        let mu_head = make(head_in, config.latent, Activation::Identity);
        let log_var_head = make(head_in, config.latent, Activation::Identity);
        let decoder = build_stack(
            config.latent,
            &config.decoder_hidden,
            Some(config.window),
            config.activation,
            &mut *make,
        );
        Self {
            encoder,
            mu_head,
            log_var_head,
            decoder,
            window: config.window,
            latent: config.latent,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn latent(&self) -> usize {
        self.latent
    }

    /// Layer shapes as (rows, cols) pairs, encoder first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layers().map(|l| (l.output_dim(), l.input_dim())).collect()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder
            .iter()
            .chain([&self.mu_head, &self.log_var_head])
            .chain(self.decoder.iter())
    }

    /// Posterior parameters `(μ, log σ²)`; log σ² is clamped to [−10, 10].
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("vae encode", self.window, x.len())?;
        let mut h = x.to_vec();
        for layer in &self.encoder {
            h = layer.apply(&h)?;
        }
        let mu = self.mu_head.apply(&h)?;
        let log_var = self
            .log_var_head
            .apply(&h)?
            .into_iter()
            .map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX))
            .collect();
        Ok((mu, log_var))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("vae decode", self.latent, z.len())?;
        let mut h = z.to_vec();
        for layer in &self.decoder {
            h = layer.apply(&h)?;
        }
        Ok(h)
    }

    /// Deterministic reconstruction through the posterior mean.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mu, _) = self.encode(x)?;
        self.decode(&mu)
    }

    /// `‖x − decode(μ(x))‖²`
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let x_hat = self.reconstruct(x)?;
        Ok(squared_distance(x, &x_hat))
    }

    /// Training loss `½‖x − x̂‖² + KL(q‖p)` and its gradients, with
    /// `z = μ + exp(½ log σ²) ⊙ noise`.
    pub fn elbo_loss(&mut self, x: &[f64], noise: &[f64]) -> Result<(f64, ParamGrads)> {
        check_len("vae elbo input", self.window, x.len())?;
        check_len("vae elbo noise", self.latent, noise.len())?;

        let mut h = x.to_vec();
        for layer in &mut self.encoder {
            h = layer.forward(&h)?;
        }
        let mu = self.mu_head.forward(&h)?;
        let raw_log_var = self.log_var_head.forward(&h)?;
        let log_var: Vec<f64> = raw_log_var.iter().map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX)).collect();
        let z = reparameterize(&mu, &log_var, noise)?;
        let mut x_hat = z.clone();
        for layer in &mut self.decoder {
            x_hat = layer.forward(&x_hat)?;
        }

        let recon = 0.5 * squared_distance(x, &x_hat);
        let kl = kl_divergence(&mu, &log_var);
        if !recon.is_finite() {
            self.clear_caches();
            return Err(VaeError::NonFinite { stage: "reconstruction" });
        }
        if !kl.is_finite() {
            self.clear_caches();
            return Err(VaeError::NonFinite { stage: "kl divergence" });
        }

        let mut upstream: Vec<f64> = x_hat.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut decoder_grads = Vec::with_capacity(self.decoder.len());
        for layer in self.decoder.iter_mut().rev() {
            let g = layer.backward(&upstream)?;
            upstream = g.input.clone();
            decoder_grads.push(g.into_param_grads());
        }
        decoder_grads.reverse();
        let dz = upstream;

        let d_mu: Vec<f64> = dz.iter().zip(&mu).map(|(g, m)| g + m).collect();
        let d_log_var: Vec<f64> = (0..self.latent)
            .map(|k| {
                if raw_log_var[k] < LOG_VAR_MIN || raw_log_var[k] > LOG_VAR_MAX {
                    return 0.0;
                }
                let sigma = (0.5 * log_var[k]).exp();
                dz[k] * noise[k] * 0.5 * sigma + 0.5 * (log_var[k].exp() - 1.0)
            })
            .collect();
        let mu_g = self.mu_head.backward(&d_mu)?;
        let lv_g = self.log_var_head.backward(&d_log_var)?;
        let mut upstream: Vec<f64> = mu_g.input.iter().zip(&lv_g.input).map(|(a, b)| a + b).collect();
        let mut encoder_grads = Vec::with_capacity(self.encoder.len());
        for layer in self.encoder.iter_mut().rev() {
            let g = layer.backward(&upstream)?;
            upstream = g.input.clone();
            encoder_grads.push(g.into_param_grads());
        }
        encoder_grads.reverse();

        let mut grads: ParamGrads = encoder_grads.into_iter().flatten().collect();
        grads.extend(mu_g.into_param_grads());
        grads.extend(lv_g.into_param_grads());
        grads.extend(decoder_grads.into_iter().flatten());
        if let Some(index) = grads.iter().flatten().position(|v| !v.is_finite()) {
            let _ = index;
            return Err(VaeError::NonFinite { stage: "gradient" });
        }
        Ok((recon + kl, grads))
    }

    /// Loss value only (no caches touched).
    pub fn loss_value(&self, x: &[f64], noise: &[f64]) -> Result<f64> {
        let (mu, log_var) = self.encode(x)?;
        let z = reparameterize(&mu, &log_var, noise)?;
        let x_hat = self.decode(&z)?;
        Ok(0.5 * squared_distance(x, &x_hat) + kl_divergence(&mu, &log_var))
    }

    /// The evidence lower bound itself, with the full unit-variance Gaussian
    /// log-likelihood: `log p(x|z) − KL(q‖p)` for a single sample of `z`.
    pub fn evidence_lower_bound(&self, x: &[f64], noise: &[f64]) -> Result<f64> {
        let (mu, log_var) = self.encode(x)?;
        let z = reparameterize(&mu, &log_var, noise)?;
        let x_hat = self.decode(&z)?;
        let log_lik = -0.5 * squared_distance(x, &x_hat) - 0.5 * self.window as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(log_lik - kl_divergence(&mu, &log_var))
    }

    fn clear_caches(&mut self) {
        for layer in self
            .encoder
            .iter_mut()
            .chain([&mut self.mu_head, &mut self.log_var_head])
            .chain(self.decoder.iter_mut())
        {
            layer.clear_cache();
        }
    }
}

impl Parameterized for VaeModel {
    fn params(&self) -> Vec<&[f64]> {
        self.layers().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .iter_mut()
            .chain([&mut self.mu_head, &mut self.log_var_head])
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `z = μ + exp(½ log σ²) ⊙ noise`
pub fn reparameterize(mu: &[f64], log_var: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_len("reparameterize log_var", mu.len(), log_var.len())?;
    check_len("reparameterize noise", mu.len(), noise.len())?;
    Ok(mu
        .iter()
        .zip(log_var)
        .zip(noise)
        .map(|((m, lv), n)| m + (0.5 * lv).exp() * n)
        .collect())
}

/// KL(N(μ, σ²) ‖ N(0, I)) = ½ Σ (σ² + μ² − 1 − log σ²)
pub fn kl_divergence(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

pub fn standard_normal_vec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Sliding buffer of recent reconstruction errors used to min–max normalize
/// the intrinsic reward.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionStats {
    buffer: VecDeque<f64>,
    capacity: usize,
}

impl Default for ReconstructionStats {
    fn default() -> Self {
        Self::new(1000)
    }
}

impl ReconstructionStats {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reconstruction buffer capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, err: f64) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(err);
    }

    pub fn min(&self) -> Option<f64> {
        self.buffer.iter().copied().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.buffer.iter().copied().reduce(f64::max)
    }

    /// `(err − min) / (max − min)` over the buffer, clamped to [0, 1]; zero
    /// when the buffer is empty or degenerate.
    pub fn intrinsic_reward(&self, err: f64) -> f64 {
        match (self.min(), self.max()) {
            (Some(lo), Some(hi)) if hi > lo => ((err - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }

    /// Records `err`, then normalizes it against the updated buffer.
    pub fn observe(&mut self, err: f64) -> f64 {
        self.push(err);
        self.intrinsic_reward(err)
    }
}

/// One optimizer step on the mean ELBO loss over `batch`. Returns the
/// pre-step mean loss.
pub fn vae_train_step<R: Rng + ?Sized>(
    model: &mut VaeModel,
    batch: &[&[f64]],
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(VaeError::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = zero_grads(model);
    let mut loss = 0.0;
    for x in batch {
        let noise = standard_normal_vec(model.latent(), rng);
        let (l, g) = model.elbo_loss(x, &noise)?;
        loss += l;
        accumulate(&mut total, &g, scale);
    }
    optimizer.apply(model, &total)?;
    Ok(loss * scale)
}

/// Pretrains on presumed-normal windows with shuffled minibatches. Returns
/// the mean loss of every epoch.
pub fn vae_pretrain<R: Rng + ?Sized>(
    model: &mut VaeModel,
    windows: &[Vec<f64>],
    epochs: usize,
    batch_size: usize,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if windows.is_empty() {
        return Err(VaeError::EmptyPool);
    }
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| windows[i].as_slice()).collect();
            sum += vae_train_step(model, &batch, optimizer, rng)?;
            batches += 1;
        }
        history.push(sum / batches as f64);
    }
    Ok(history)
}
