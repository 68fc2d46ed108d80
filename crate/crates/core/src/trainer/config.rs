//! Flat `key = value` run configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::active::Strategy;
use crate::data::{AnomalyKinds, BasePattern, SynthSpec};
use crate::dqn::{AgentConfig, EpsilonSchedule, InputMode};
use crate::nn::Activation;
use crate::vae::VaeConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("`{key}` = {value} is out of range: {reason}")]
    OutOfRange { key: &'static str, value: String, reason: &'static str },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synth,
    Yahoo,
    Kpi,
}

impl DataSource {
    pub fn name(self) -> &'static str {
        match self {
            DataSource::Synth => "synth",
            DataSource::Yahoo => "yahoo",
            DataSource::Kpi => "kpi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Simulated,
    Human,
}

impl OracleMode {
    pub fn name(self) -> &'static str {
        match self {
            OracleMode::Simulated => "simulated",
            OracleMode::Human => "human",
        }
    }
}

/// Every tunable of a run. Field names double as config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Whether `seed` came from a config file or override rather than the
    /// default.
    pub seed_explicit: bool,

    pub source: DataSource,
    pub data_path: Option<PathBuf>,
    pub synth_series: usize,
    pub synth_length: usize,
    pub synth_noise: f64,
    pub synth_anomaly_rate: f64,
    pub synth_pattern: BasePattern,
    pub synth_kinds: AnomalyKinds,

    pub window: usize,
    pub stride: usize,
    pub split_ratio: f64,

    pub episodes: usize,
    /// Share of anomalous train windows placed in the initial labeled set.
    pub label_fraction: f64,
    /// Queries issued after each episode but the last.
    pub query_k: usize,
    pub strategy: Strategy,
    pub oracle: OracleMode,
    pub human_timeout_secs: u64,

    pub agent: AgentConfig,

    pub vae_latent: usize,
    pub vae_hidden: Vec<usize>,
    pub vae_pretrain_epochs: usize,
    pub vae_batch_size: usize,
    pub vae_learning_rate: f64,
    pub vae_online_every: usize,
    pub vae_online_lr_scale: f64,

    pub bind: String,
    pub static_dir: Option<PathBuf>,
    pub journal: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seed_explicit: false,
            source: DataSource::Synth,
            data_path: None,
            synth_series: 20,
            synth_length: 2000,
            synth_noise: 0.1,
            synth_anomaly_rate: 0.05,
            synth_pattern: BasePattern::Sine,
            synth_kinds: AnomalyKinds::ALL,
            window: 25,
            stride: 1,
            split_ratio: 0.8,
            episodes: 30,
            label_fraction: 0.05,
            query_k: 10,
            strategy: Strategy::Margin,
            oracle: OracleMode::Simulated,
            human_timeout_secs: 600,
            agent: AgentConfig::default(),
            vae_latent: 8,
            vae_hidden: vec![32, 16],
            vae_pretrain_epochs: 30,
            vae_batch_size: 32,
            vae_learning_rate: 1e-3,
            vae_online_every: 10,
            vae_online_lr_scale: 0.1,
            bind: "127.0.0.1:8791".to_string(),
            static_dir: None,
            journal: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Reads a config file over the defaults. Does not validate.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        if key.trim().is_empty() {
            return Err(ConfigError::BadOverride(spec.to_string()));
        }
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.agent;
        match key {
            "seed" => {
                self.seed = parse(key, value)?;
                self.seed_explicit = true;
            }
            "source" => {
                self.source = match value {
                    "synth" => DataSource::Synth,
                    "yahoo" => DataSource::Yahoo,
                    "kpi" => DataSource::Kpi,
                    _ => return Err(bad(key, value, "expected synth, yahoo or kpi")),
                }
            }
            "data_path" => self.data_path = optional_path(value),
            "synth_series" => self.synth_series = parse(key, value)?,
            "synth_length" => self.synth_length = parse(key, value)?,
            "synth_noise" => self.synth_noise = parse(key, value)?,
            "synth_anomaly_rate" => self.synth_anomaly_rate = parse(key, value)?,
            "synth_pattern" => {
                self.synth_pattern = match value {
                    "sine" => BasePattern::Sine,
                    "trend_sine" => BasePattern::TrendSine,
                    _ => return Err(bad(key, value, "expected sine or trend_sine")),
                }
            }
            "synth_kinds" => {
                let mut kinds = AnomalyKinds {
                    spike: false,
                    level_shift: false,
                };
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    match part {
                        "spike" => kinds.spike = true,
                        "level_shift" => kinds.level_shift = true,
                        _ => return Err(bad(key, value, "expected a list of spike, level_shift")),
                    }
                }
                self.synth_kinds = kinds;
            }
            "window" => self.window = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "split_ratio" => self.split_ratio = parse(key, value)?,
            "episodes" => self.episodes = parse(key, value)?,
            "label_fraction" => self.label_fraction = parse(key, value)?,
            "query_k" => self.query_k = parse(key, value)?,
            "strategy" => {
                self.strategy = Strategy::parse(value)
                    .ok_or_else(|| bad(key, value, "expected margin, least_confidence, entropy or random"))?
            }
            "oracle" => {
                self.oracle = match value {
                    "simulated" => OracleMode::Simulated,
                    "human" => OracleMode::Human,
                    _ => return Err(bad(key, value, "expected simulated or human")),
                }
            }
            "human_timeout_secs" => self.human_timeout_secs = parse(key, value)?,
            "gamma" => a.gamma = parse(key, value)?,
            "learning_rate" => a.learning_rate = parse(key, value)?,
            "epsilon_start" => a.epsilon.start = parse(key, value)?,
            "epsilon_end" => a.epsilon.end = parse(key, value)?,
            "epsilon_decay_steps" => a.epsilon.decay_steps = parse(key, value)?,
            "r_sync" => a.r_sync = parse(key, value)?,
            "batch_size" => a.batch_size = parse(key, value)?,
            "capacity" => a.capacity = parse(key, value)?,
            "hidden" => a.hidden = parse(key, value)?,
            "learn_every" => a.learn_every = parse(key, value)?,
            "input_mode" => {
                a.input_mode =
                    InputMode::parse(value).ok_or_else(|| bad(key, value, "expected raw, reconstructed or concat"))?
            }
            "vae_latent" => self.vae_latent = parse(key, value)?,
            "vae_hidden" => {
                self.vae_hidden = value
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| parse(key, p))
                    .collect::<Result<_>>()?
            }
            "vae_pretrain_epochs" => self.vae_pretrain_epochs = parse(key, value)?,
            "vae_batch_size" => self.vae_batch_size = parse(key, value)?,
            "vae_learning_rate" => self.vae_learning_rate = parse(key, value)?,
            "vae_online_every" => self.vae_online_every = parse(key, value)?,
            "vae_online_lr_scale" => self.vae_online_lr_scale = parse(key, value)?,
            "bind" => self.bind = value.to_string(),
            "static_dir" => self.static_dir = optional_path(value),
            "journal" => self.journal = optional_path(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &'static str, value: impl Display, reason: &'static str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    key,
                    value: value.to_string(),
                    reason,
                })
            }
        }
        let a = &self.agent;
        check(self.window >= 2, "window", self.window, "must be at least 2")?;
        check(self.stride >= 1, "stride", self.stride, "must be at least 1")?;
        check(
            self.split_ratio > 0.0 && self.split_ratio < 1.0,
            "split_ratio",
            self.split_ratio,
            "must lie in (0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.label_fraction),
            "label_fraction",
            self.label_fraction,
            "must lie in [0, 1]",
        )?;
        check(self.synth_series >= 1, "synth_series", self.synth_series, "must be at least 1")?;
        check(self.synth_noise >= 0.0, "synth_noise", self.synth_noise, "must be non-negative")?;
        check(
            (0.0..=0.2).contains(&self.synth_anomaly_rate),
            "synth_anomaly_rate",
            self.synth_anomaly_rate,
            "must lie in [0, 0.2]",
        )?;
        check(
            self.synth_kinds.spike || self.synth_kinds.level_shift,
            "synth_kinds",
            "",
            "needs at least one kind",
        )?;
        check((0.0..1.0).contains(&a.gamma), "gamma", a.gamma, "must lie in [0, 1)")?;
        check(a.learning_rate > 0.0, "learning_rate", a.learning_rate, "must be positive")?;
        check(
            (0.0..=1.0).contains(&a.epsilon.start),
            "epsilon_start",
            a.epsilon.start,
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=a.epsilon.start).contains(&a.epsilon.end),
            "epsilon_end",
            a.epsilon.end,
            "must lie in [0, epsilon_start]",
        )?;
        check(a.r_sync >= 1, "r_sync", a.r_sync, "must be at least 1")?;
        check(a.batch_size >= 1, "batch_size", a.batch_size, "must be at least 1")?;
        check(a.capacity >= a.batch_size, "capacity", a.capacity, "must be at least batch_size")?;
        check(a.hidden >= 1, "hidden", a.hidden, "must be at least 1")?;
        check(a.learn_every >= 1, "learn_every", a.learn_every, "must be at least 1")?;
        check(self.vae_latent >= 1, "vae_latent", self.vae_latent, "must be at least 1")?;
        check(
            self.vae_hidden.iter().all(|&h| h >= 1),
            "vae_hidden",
            join(&self.vae_hidden),
            "layer sizes must be positive",
        )?;
        check(self.vae_batch_size >= 1, "vae_batch_size", self.vae_batch_size, "must be at least 1")?;
        check(
            self.vae_learning_rate > 0.0,
            "vae_learning_rate",
            self.vae_learning_rate,
            "must be positive",
        )?;
        check(
            self.vae_online_lr_scale >= 0.0,
            "vae_online_lr_scale",
            self.vae_online_lr_scale,
            "must be non-negative",
        )?;
        check(
            self.source == DataSource::Synth || self.data_path.is_some(),
            "data_path",
            "",
            "required for yahoo and kpi sources",
        )?;
        Ok(())
    }

    pub fn vae_config(&self) -> VaeConfig {
        let mut decoder = self.vae_hidden.clone();
        decoder.reverse();
        VaeConfig {
            window: self.window,
            latent: self.vae_latent,
            encoder_hidden: self.vae_hidden.clone(),
            decoder_hidden: decoder,
            activation: Activation::Tanh,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            pattern: self.synth_pattern,
            length: self.synth_length,
            noise_sigma: self.synth_noise,
            anomaly_rate: self.synth_anomaly_rate,
            kinds: self.synth_kinds,
            seed: self.seed,
        }
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let a = &self.agent;
        let EpsilonSchedule {
            start,
            end,
            decay_steps,
        } = a.epsilon;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let kinds: Vec<&str> = [
            (self.synth_kinds.spike, "spike"),
            (self.synth_kinds.level_shift, "level_shift"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        vec![
            ("seed", self.seed.to_string()),
            ("source", self.source.name().to_string()),
            ("data_path", path(&self.data_path)),
            ("synth_series", self.synth_series.to_string()),
            ("synth_length", self.synth_length.to_string()),
            ("synth_noise", self.synth_noise.to_string()),
            ("synth_anomaly_rate", self.synth_anomaly_rate.to_string()),
            (
                "synth_pattern",
                match self.synth_pattern {
                    BasePattern::Sine => "sine",
                    BasePattern::TrendSine => "trend_sine",
                }
                .to_string(),
            ),
            ("synth_kinds", kinds.join(",")),
            ("window", self.window.to_string()),
            ("stride", self.stride.to_string()),
            ("split_ratio", self.split_ratio.to_string()),
            ("episodes", self.episodes.to_string()),
            ("label_fraction", self.label_fraction.to_string()),
            ("query_k", self.query_k.to_string()),
            ("strategy", self.strategy.name().to_string()),
            ("oracle", self.oracle.name().to_string()),
            ("human_timeout_secs", self.human_timeout_secs.to_string()),
            ("gamma", a.gamma.to_string()),
            ("learning_rate", a.learning_rate.to_string()),
            ("epsilon_start", start.to_string()),
            ("epsilon_end", end.to_string()),
            ("epsilon_decay_steps", decay_steps.to_string()),
            ("r_sync", a.r_sync.to_string()),
            ("batch_size", a.batch_size.to_string()),
            ("capacity", a.capacity.to_string()),
            ("hidden", a.hidden.to_string()),
            ("learn_every", a.learn_every.to_string()),
            ("input_mode", a.input_mode.name().to_string()),
            ("vae_latent", self.vae_latent.to_string()),
            ("vae_hidden", join(&self.vae_hidden)),
            ("vae_pretrain_epochs", self.vae_pretrain_epochs.to_string()),
            ("vae_batch_size", self.vae_batch_size.to_string()),
            ("vae_learning_rate", self.vae_learning_rate.to_string()),
            ("vae_online_every", self.vae_online_every.to_string()),
            ("vae_online_lr_scale", self.vae_online_lr_scale.to_string()),
            ("bind", self.bind.clone()),
            ("static_dir", path(&self.static_dir)),
            ("journal", path(&self.journal)),
        ]
    }

    /// The resolved config in file syntax.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
