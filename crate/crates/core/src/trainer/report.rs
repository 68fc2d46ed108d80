use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{EvalReport, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub kv: PathBuf,
    pub text: PathBuf,
    pub episodes: PathBuf,
}

/// Machine-readable `key=value` report. Contains no timestamps, so seeded
/// reruns reproduce it byte for byte.
pub fn report_kv(cfg: &RunConfig, r: &EvalReport) -> String {
    let mut out = String::new();
    let c = &r.confusion;
    let fields: [(&str, String); 16] = [
        ("precision", r.precision.to_string()),
        ("recall", r.recall.to_string()),
        ("f1", r.f1.to_string()),
        ("labels_used", r.labels_used.to_string()),
        ("episodes", r.episodes.to_string()),
        ("seed", r.seed.to_string()),
        ("tp", c.tp.to_string()),
        ("fp", c.fp.to_string()),
        ("fn", c.fn_.to_string()),
        ("tn", c.tn.to_string()),
        ("initial_labels", r.initial_labels.to_string()),
        ("queries_answered", r.queries_answered.to_string()),
        ("queries_expired", r.queries_expired.to_string()),
        ("label_budget", r.label_budget.to_string()),
        ("vae_anomalous_error", r.vae_anomalous_error.to_string()),
        ("vae_normal_error", r.vae_normal_error.to_string()),
    ];
    for (k, v) in fields {
        let _ = writeln!(out, "{k}={v}");
    }
    for (k, v) in cfg.entries() {
        let _ = writeln!(out, "config.{k}={v}");
    }
    out
}

pub fn report_episodes_csv(r: &EvalReport) -> String {
    let mut out = String::from("episode,series,steps,reward,train_f1\n");
    for i in 0..r.episode_rewards.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i, r.episode_series[i], r.episode_steps[i], r.episode_rewards[i], r.episode_f1[i]
        );
    }
    out
}

pub fn report_text(cfg: &RunConfig, r: &EvalReport) -> String {
    let c = &r.confusion;
    let mut out = String::new();
    let _ = writeln!(out, "RLVAL run report");
    let _ = writeln!(out, "================");
    let _ = writeln!(
        out,
        "seed {}  source {}  episodes {}  strategy {}  input {}",
        cfg.seed,
        cfg.source.name(),
        r.episodes,
        cfg.strategy.name(),
        cfg.agent.input_mode.name()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "test windows   {}", c.total());
    let _ = writeln!(out, "precision      {:.4}", r.precision);
    let _ = writeln!(out, "recall         {:.4}", r.recall);
    let _ = writeln!(out, "f1             {:.4}", r.f1);
    let _ = writeln!(out, "confusion      tp {}  fp {}  fn {}  tn {}", c.tp, c.fp, c.fn_, c.tn);
    let _ = writeln!(
        out,
        "labels used    {} of {} ({} initial, {} queried, {} expired)",
        r.labels_used, r.label_budget, r.initial_labels, r.queries_answered, r.queries_expired
    );
    let _ = writeln!(
        out,
        "vae error      anomalous {:.4}  normal {:.4}  ratio {:.2}",
        r.vae_anomalous_error,
        r.vae_normal_error,
        r.vae_error_ratio()
    );
    if let (Some(first), Some(last)) = (r.episode_f1.first(), r.episode_f1.last()) {
        let _ = writeln!(out, "train f1       {first:.4} after episode 0, {last:.4} at the end");
    }
    out
}

/// Writes `report.kv`, `report.txt` and `episodes.csv` into `dir`.
pub fn write_reports(dir: &Path, cfg: &RunConfig, r: &EvalReport) -> std::io::Result<ReportPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        kv: dir.join("report.kv"),
        text: dir.join("report.txt"),
        episodes: dir.join("episodes.csv"),
    };
    std::fs::write(&paths.kv, report_kv(cfg, r))?;
    std::fs::write(&paths.text, report_text(cfg, r))?;
    std::fs::write(&paths.episodes, report_episodes_csv(r))?;
    Ok(paths)
}
