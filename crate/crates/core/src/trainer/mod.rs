//! End-to-end training: VAE pretraining, the episode loop with replay
//! learning and per-episode active-learning queries, and evaluation.

mod checkpoint;
mod config;
mod metrics;
mod report;

pub use checkpoint::{checkpoint_read, checkpoint_save, Checkpoint, CheckpointError, Manifest, CHECKPOINT_VERSION};
pub use config::{ConfigError, DataSource, OracleMode, RunConfig};
pub use metrics::{evaluate, f1_score, Confusion};
pub use report::{report_episodes_csv, report_kv, report_text, write_reports, ReportPaths};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{ActiveError, QueryBook, QueryBudget, Strategy};
use crate::data::{load_kpi_csv, load_yahoo_dir, split_train_test, synth_corpus, window_extract, DataError, NormStats, TimeSeries};
use crate::dqn::{make_state_input, DqnAgent, DqnError, Transition};
use crate::env::{EnvError, Environment, WindowId, WindowState};
use crate::labeling::{LabelingError, Oracle, RunStatus, SimulatedOracle, TrainMetrics};
use crate::nn::{Optimizer, OptimizerKind};
use crate::vae::{vae_pretrain, vae_train_step, ReconstructionStats, VaeError, VaeModel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Labeling(#[from] LabelingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("test window {0} has no ground truth")]
    UnlabeledTestWindow(WindowId),
    #[error("corpus has no usable series")]
    EmptyCorpus,
    #[error("episode {episode}, epoch {epoch}: {source}")]
    During {
        episode: usize,
        epoch: usize,
        #[source]
        source: Box<TrainError>,
    },
}

pub type Result<T> = std::result::Result<T, TrainError>;

fn during<E: Into<TrainError>>(episode: usize, epoch: usize) -> impl FnOnce(E) -> TrainError {
    move |e| TrainError::During {
        episode,
        epoch,
        source: Box::new(e.into()),
    }
}

/// Loads or generates the raw corpus named by the config.
pub fn load_corpus(cfg: &RunConfig) -> Result<Vec<TimeSeries>> {
    let path = || cfg.data_path.clone().unwrap_or_default();
    let series = match cfg.source {
        DataSource::Synth => synth_corpus(&cfg.synth_spec(), cfg.synth_series)?,
        DataSource::Yahoo => load_yahoo_dir(&path())?.series,
        DataSource::Kpi => load_kpi_csv(&path())?.series,
    };
    Ok(series)
}

/// Normalized train/test splits and their windows, one entry per usable
/// series.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    /// Un-normalized train splits, for display to a human labeler.
    pub raw_train: Vec<TimeSeries>,
    pub train_windows: Vec<Vec<WindowState>>,
    pub test_windows: Vec<Vec<WindowState>>,
    pub norm: Vec<NormStats>,
}

impl PreparedCorpus {
    pub fn series_count(&self) -> usize {
        self.train_windows.len()
    }

    pub fn test_flat(&self) -> Vec<WindowState> {
        self.test_windows.iter().flatten().cloned().collect()
    }
}

/// Temporal split, z-scoring with train statistics, and windowing. Series
/// too short to split are skipped with a warning.
pub fn prepare_corpus(series: &[TimeSeries], cfg: &RunConfig) -> Result<PreparedCorpus> {
    let mut out = PreparedCorpus {
        raw_train: Vec::new(),
        train_windows: Vec::new(),
        test_windows: Vec::new(),
        norm: Vec::new(),
    };
    for s in series {
        let (train, test) = match split_train_test(s, cfg.split_ratio, cfg.window) {
            Ok(pair) => pair,
            Err(e @ DataError::TooShort { .. }) => {
                log::warn!("skipping series `{}`: {e}", s.id);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let stats = NormStats::fit(&train)?;
        let index = out.train_windows.len();
        out.train_windows
            .push(window_extract(&stats.apply(&train), index, cfg.window, cfg.stride)?);
        out.test_windows
            .push(window_extract(&stats.apply(&test), index, cfg.window, cfg.stride)?);
        out.raw_train.push(train);
        out.norm.push(stats);
    }
    if out.train_windows.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub episodes: usize,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub initial_labels: usize,
    pub queries_answered: usize,
    pub queries_expired: usize,
    /// `initial_labels + queries_answered`.
    pub labels_used: usize,
    /// `initial_labels + query_k × (episodes − 1)`.
    pub label_budget: usize,
    pub episode_series: Vec<usize>,
    pub episode_rewards: Vec<f64>,
    pub episode_steps: Vec<usize>,
    pub episode_f1: Vec<f64>,
    /// Mean reconstruction error of anomalous and normal test windows right
    /// after VAE pretraining.
    pub vae_anomalous_error: f64,
    pub vae_normal_error: f64,
}

impl EvalReport {
    pub fn vae_error_ratio(&self) -> f64 {
        if self.vae_normal_error > 0.0 {
            self.vae_anomalous_error / self.vae_normal_error
        } else {
            f64::INFINITY
        }
    }
}

pub struct TrainOutcome {
    pub agent: DqnAgent,
    pub vae: VaeModel,
    pub report: EvalReport,
}

fn mean_errors(vae: &VaeModel, windows: &[WindowState]) -> Result<(f64, f64)> {
    let (mut anom, mut na, mut norm, mut nn) = (0.0, 0usize, 0.0, 0usize);
    for w in windows {
        let e = vae.reconstruction_error(&w.values)?;
        match w.is_anomalous() {
            Some(true) => {
                anom += e;
                na += 1;
            }
            Some(false) => {
                norm += e;
                nn += 1;
            }
            None => {}
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok((mean(anom, na), mean(norm, nn)))
}

/// Trains with the error-free simulated oracle.
pub fn run_simulated(cfg: &RunConfig, corpus: &PreparedCorpus) -> Result<TrainOutcome> {
    run_training(cfg, corpus, &mut SimulatedOracle::new())
}

/// Runs the full training procedure and evaluates on the test windows.
///
/// Each episode walks one training series in temporal order (cycling over
/// series). Answers to the previous episode's queries are applied at the
/// episode boundary, and new queries are issued after every episode but the
/// last.
pub fn run_training(cfg: &RunConfig, corpus: &PreparedCorpus, oracle: &mut dyn Oracle) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mode = cfg.agent.input_mode;
    let mut env = Environment::new(corpus.train_windows.clone(), cfg.window, cfg.stride);
    let initial_labels = env.seed_labeled_anomalies(cfg.label_fraction, &mut rng);
    let test = corpus.test_flat();

    let vae_cfg = cfg.vae_config();
    let mut vae = VaeModel::random(&vae_cfg, &mut rng);
    let pool: Vec<Vec<f64>> = env.normal_pool().into_iter().map(|w| w.values.clone()).collect();
    let mut vae_opt = Optimizer::new(OptimizerKind::Adam, cfg.vae_learning_rate);
    if cfg.vae_pretrain_epochs > 0 {
        let losses = vae_pretrain(&mut vae, &pool, cfg.vae_pretrain_epochs, cfg.vae_batch_size, &mut vae_opt, &mut rng)?;
        log::info!(
            "vae pretrained on {} windows, final loss {:.4}",
            pool.len(),
            losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    let (vae_anomalous_error, vae_normal_error) = mean_errors(&vae, &test)?;
    let online_lr = cfg.vae_learning_rate * cfg.vae_online_lr_scale;
    let mut online_opt = Optimizer::new(OptimizerKind::Adam, online_lr.max(f64::MIN_POSITIVE));

    let mut agent = DqnAgent::new(cfg.agent.clone(), cfg.window, &mut rng);
    let mut stats = ReconstructionStats::default();
    let mut book = QueryBook::new();
    let budget = QueryBudget {
        k: cfg.query_k,
        strategy: cfg.strategy,
    };
    let mut status = RunStatus {
        labels_consumed: initial_labels,
        ..RunStatus::default()
    };
    oracle.publish_status(&status);

    let mut expired = 0usize;
    let mut episode_series = Vec::with_capacity(cfg.episodes);
    let mut episode_rewards = Vec::with_capacity(cfg.episodes);
    let mut episode_steps = Vec::with_capacity(cfg.episodes);
    let mut episode_f1 = Vec::with_capacity(cfg.episodes);
    let mut recent: Vec<Vec<f64>> = Vec::new();

    for episode in 0..cfg.episodes {
        let collected = oracle.collect().map_err(during(episode, 0))?;
        expired += collected.expired.len();
        book.expire(&collected.expired);
        book.incorporate(&collected.records, &mut env).map_err(during(episode, 0))?;
        status.labels_consumed = initial_labels + book.answered();

        let series = episode % env.series_count();
        let mut state = env.begin_episode(series).map_err(during(episode, 0))?;
        let mut input = make_state_input(&state.values, &vae, mode).map_err(during(episode, 0))?;
        let mut total = 0.0;
        let mut epoch = 0usize;
        loop {
            let at = during(episode, epoch);
            let (action, _) = agent.act(&input, &mut rng).map_err(at)?;
            let err = vae.reconstruction_error(&state.values).map_err(during(episode, epoch))?;
            let r2 = stats.observe(err);
            let out = env.step(action, r2).map_err(during(episode, epoch))?;
            let next_input = match &out.next {
                Some(next) => Some(make_state_input(&next.values, &vae, mode).map_err(during(episode, epoch))?),
                None => None,
            };
            agent
                .observe(Transition::new(input, action, out.reward, next_input.clone()), &mut rng)
                .map_err(during(episode, epoch))?;
            total += out.reward;

            recent.push(state.values.clone());
            if let Some(next) = &out.next {
                recent.push(next.values.clone());
            }
            epoch += 1;
            if cfg.vae_online_every > 0 && online_lr > 0.0 && epoch % cfg.vae_online_every == 0 {
                let batch: Vec<&[f64]> = recent.iter().map(Vec::as_slice).collect();
                vae_train_step(&mut vae, &batch, &mut online_opt, &mut rng).map_err(during(episode, epoch))?;
                recent.clear();
            }

            status.episode = episode;
            status.epoch = epoch;
            oracle.publish_status(&status);

            match (out.next, next_input) {
                (Some(next), Some(ni)) => {
                    state = next;
                    input = ni;
                }
                _ => break,
            }
        }
        recent.clear();

        let train = evaluate(&agent.online, &vae, mode, env.windows()).map_err(during(episode, epoch))?;
        episode_series.push(series);
        episode_rewards.push(total);
        episode_steps.push(epoch);
        episode_f1.push(train.f1());
        status.train_metrics = Some(TrainMetrics {
            precision: train.precision(),
            recall: train.recall(),
            f1: train.f1(),
        });
        oracle.publish_status(&status);
        log::info!(
            "episode {episode}: series {series}, reward {total:.3}, train f1 {:.3}, labels {}",
            train.f1(),
            status.labels_consumed
        );

        if episode + 1 < cfg.episodes && budget.k > 0 {
            let net = &agent.online;
            let items = book
                .issue(
                    &env,
                    budget,
                    |v| -> Result<[f64; 2]> { Ok(net.q_values(&make_state_input(v, &vae, mode)?)?) },
                    &mut rng,
                )
                .map_err(during(episode, epoch))?;
            oracle.submit(&items, &env).map_err(during(episode, epoch))?;
        }
    }

    let confusion = evaluate(&agent.online, &vae, mode, &test)?;
    let queries_answered = book.answered();
    let report = EvalReport {
        seed: cfg.seed,
        episodes: cfg.episodes,
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        initial_labels,
        queries_answered,
        queries_expired: expired,
        labels_used: initial_labels + queries_answered,
        label_budget: initial_labels + cfg.query_k * cfg.episodes.saturating_sub(1),
        episode_series,
        episode_rewards,
        episode_steps,
        episode_f1,
        vae_anomalous_error,
        vae_normal_error,
    };
    Ok(TrainOutcome { agent, vae, report })
}

/// One simulated-oracle run per strategy with otherwise identical config.
pub fn compare_strategies(cfg: &RunConfig, corpus: &PreparedCorpus) -> Result<Vec<(Strategy, EvalReport)>> {
    Strategy::ALL
        .into_iter()
        .map(|strategy| {
            let mut c = cfg.clone();
            c.strategy = strategy;
            run_simulated(&c, corpus).map(|o| (strategy, o.report))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "synth_series = 3\nsynth_length = 240\nwindow = 8\nstride = 4\nepisodes = 4\nquery_k = 3\n\
             hidden = 4\nbatch_size = 8\nvae_hidden = 8\nvae_latent = 2\nvae_pretrain_epochs = 2\nseed = 5\n\
             label_fraction = 0.5\n",
        )
        .unwrap();
        cfg
    }

    fn corpus(cfg: &RunConfig) -> PreparedCorpus {
        prepare_corpus(&load_corpus(cfg).unwrap(), cfg).unwrap()
    }

    #[test]
    fn prepare_splits_and_normalizes() {
        let cfg = tiny_config();
        let c = corpus(&cfg);
        assert_eq!(c.series_count(), 3);
        // 192 train points → (192 − 8)/4 + 1 windows; 48 test points → 11
        assert!(c.train_windows.iter().all(|w| w.len() == 47));
        assert!(c.test_windows.iter().all(|w| w.len() == 11));
        assert!(c.raw_train.iter().all(|s| s.len() == 192));
        assert!(c.test_windows[2].iter().all(|w| w.id.series == 2));
    }

    #[test]
    fn zero_episodes_still_evaluates() {
        let mut cfg = tiny_config();
        cfg.episodes = 0;
        let c = corpus(&cfg);
        let out = run_simulated(&cfg, &c).unwrap();
        assert_eq!(out.report.confusion.total(), 33);
        assert!(out.report.episode_rewards.is_empty());
        assert_eq!(out.report.queries_answered, 0);
    }

    #[test]
    fn label_accounting_and_bounds() {
        let cfg = tiny_config();
        let c = corpus(&cfg);
        let r = run_simulated(&cfg, &c).unwrap().report;
        assert_eq!(r.queries_answered, 3 * 3);
        assert_eq!(r.labels_used, r.initial_labels + r.queries_answered);
        assert!(r.labels_used <= r.label_budget);
        assert_eq!(r.episode_series, vec![0, 1, 2, 0]);
        for (reward, steps) in r.episode_rewards.iter().zip(&r.episode_steps) {
            assert_eq!(*steps, 47);
            assert!(*reward >= -(*steps as f64) && *reward <= 2.0 * *steps as f64);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = tiny_config();
        let c = corpus(&cfg);
        let a = run_simulated(&cfg, &c).unwrap();
        let b = run_simulated(&cfg, &c).unwrap();
        assert_eq!(a.report, b.report);
        use crate::nn::Parameterized;
        assert_eq!(a.agent.online.param_checksum(), b.agent.online.param_checksum());
    }

    #[test]
    fn strategies_coincide_without_queries() {
        let mut cfg = tiny_config();
        cfg.query_k = 0;
        cfg.episodes = 2;
        let c = corpus(&cfg);
        let rows = compare_strategies(&cfg, &c).unwrap();
        assert_eq!(rows.len(), 4);
        for (_, r) in &rows[1..] {
            assert_eq!(r, &rows[0].1);
        }
    }

    #[test]
    fn evaluation_is_idempotent() {
        let cfg = tiny_config();
        let c = corpus(&cfg);
        let out = run_simulated(&cfg, &c).unwrap();
        let test = c.test_flat();
        let a = evaluate(&out.agent.online, &out.vae, cfg.agent.input_mode, &test).unwrap();
        let b = evaluate(&out.agent.online, &out.vae, cfg.agent.input_mode, &test).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, out.report.confusion);
    }

    #[test]
    fn invalid_config_is_rejected_before_training() {
        let mut cfg = tiny_config();
        let c = corpus(&cfg);
        cfg.agent.gamma = 1.5;
        assert!(matches!(run_simulated(&cfg, &c), Err(TrainError::Config(_))));
    }
}
