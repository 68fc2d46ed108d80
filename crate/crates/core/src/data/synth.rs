use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Result, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasePattern {
    Sine,
    TrendSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyKinds {
    pub spike: bool,
    pub level_shift: bool,
}

impl AnomalyKinds {
    pub const ALL: Self = Self {
        spike: true,
        level_shift: true,
    };
}

/// Parameters of a seeded synthetic series with injected, labeled anomalies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub pattern: BasePattern,
    pub length: usize,
    /// Standard deviation of the additive Gaussian noise; the base sine has
    /// unit amplitude.
    pub noise_sigma: f64,
    /// Expected share of anomalous points, in [0, 0.2].
    pub anomaly_rate: f64,
    pub kinds: AnomalyKinds,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            pattern: BasePattern::Sine,
            length: 2000,
            noise_sigma: 0.1,
            anomaly_rate: 0.05,
            kinds: AnomalyKinds::ALL,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.2).contains(&self.anomaly_rate) {
            return Err(DataError::InvalidSynth(format!(
                "anomaly rate {} outside [0, 0.2]",
                self.anomaly_rate
            )));
        }
        if self.anomaly_rate > 0.0 && !self.kinds.spike && !self.kinds.level_shift {
            return Err(DataError::InvalidSynth("no anomaly kinds enabled".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(DataError::InvalidSynth(format!("noise sigma {} invalid", self.noise_sigma)));
        }
        if self.length < 2 {
            return Err(DataError::InvalidSynth("length must be at least 2".into()));
        }
        Ok(())
    }
}

const SPIKE_SIGMAS: f64 = 6.0;
const SHIFT_SIGMAS: f64 = 3.0;
const SHIFT_MIN: usize = 10;
const SHIFT_MAX: usize = 30;

/// Generates one series named `real_1` with timestamps `1..=length`.
///
/// The anomalous point count is drawn from Binomial(length, rate); events
/// are then placed on free points until that count is reached (exactly,
/// unless level shifts are the only kind). Spikes move a
/// single point by ±6σ and level shifts move 10–30 consecutive points by
/// ±3σ, where σ is the deviation of the clean series.
pub fn synth_generate(spec: &SynthSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.length;
    let period = rng.random_range(40.0..100.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let slope = match spec.pattern {
        BasePattern::Sine => 0.0,
        BasePattern::TrendSine => rng.random_range(-2.0..2.0) / n as f64,
    };
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| DataError::InvalidSynth(e.to_string()))?;
    let mut values: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            (std::f64::consts::TAU * t / period + phase).sin() + slope * t + noise.sample(&mut rng)
        })
        .collect();

    let mean = values.iter().sum::<f64>() / n as f64;
    let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let mut labels = vec![false; n];
    if spec.anomaly_rate > 0.0 {
        let target = Binomial::new(n as u64, spec.anomaly_rate)
            .map_err(|e| DataError::InvalidSynth(e.to_string()))?
            .sample(&mut rng) as usize;
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < target && attempts < 100 * n {
            attempts += 1;
            let remaining = target - placed;
            let shift = match (spec.kinds.spike, spec.kinds.level_shift) {
                (true, true) => remaining >= SHIFT_MIN && rng.random_bool(0.5),
                (false, true) => true,
                _ => false,
            };
            let len = if shift {
                rng.random_range(SHIFT_MIN..=SHIFT_MAX).min(remaining.max(SHIFT_MIN)).min(n)
            } else {
                1
            };
            let start = rng.random_range(0..=n - len);
            // keep events separated by at least one normal point
            let lo = start.saturating_sub(1);
            let hi = (start + len + 1).min(n);
            if labels[lo..hi].iter().any(|&l| l) {
                continue;
            }
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let magnitude = if shift { SHIFT_SIGMAS } else { SPIKE_SIGMAS } * sigma * sign;
            for t in start..start + len {
                values[t] += magnitude;
                labels[t] = true;
            }
            placed += len;
        }
    }

    TimeSeries::new("real_1", (1..=n as i64).collect(), values, Some(labels))
}

/// `count` series derived from `base`, with per-series seeds and ids
/// `real_1..real_count`.
pub fn synth_corpus(base: &SynthSpec, count: usize) -> Result<Vec<TimeSeries>> {
    (0..count)
        .map(|i| {
            let spec = SynthSpec {
                seed: base.seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                ..base.clone()
            };
            let mut s = synth_generate(&spec)?;
            s.id = format!("real_{}", i + 1);
            Ok(s)
        })
        .collect()
}
