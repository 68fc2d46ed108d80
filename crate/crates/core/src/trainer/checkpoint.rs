//! Text checkpoints: a header, a shape manifest, then every parameter as the
//! hex bits of its f64, one per line, closed by an `end` marker.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dqn::{InputMode, QNetwork};
use crate::nn::Parameterized;
use crate::vae::{VaeConfig, VaeModel};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "rlval-checkpoint";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("checkpoint {path} is corrupt at line {line}: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
    #[error("checkpoint {path} has version {found}, expected {CHECKPOINT_VERSION}")]
    Version { path: PathBuf, found: String },
    #[error("checkpoint {path} does not match the configured model: {detail}")]
    ManifestMismatch { path: PathBuf, detail: String },
}

/// Shapes that must agree between a checkpoint and the models it restores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub window: usize,
    pub input_mode: String,
    pub qnet_channels: usize,
    pub qnet_hidden: usize,
    pub qnet_groups: Vec<usize>,
    pub vae_latent: usize,
    pub vae_layers: Vec<(usize, usize)>,
    pub vae_groups: Vec<usize>,
}

impl Manifest {
    pub fn of(net: &QNetwork, vae: &VaeModel, mode: InputMode) -> Self {
        Self {
            window: net.window(),
            input_mode: mode.name().to_string(),
            qnet_channels: net.channels(),
            qnet_hidden: net.hidden(),
            qnet_groups: net.params().iter().map(|g| g.len()).collect(),
            vae_latent: vae.latent(),
            vae_layers: vae.layer_shapes(),
            vae_groups: vae.params().iter().map(|g| g.len()).collect(),
        }
    }

    fn lines(&self) -> Vec<String> {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let layers = self
            .vae_layers
            .iter()
            .map(|(i, o)| format!("{i}x{o}"))
            .collect::<Vec<_>>()
            .join(",");
        vec![
            format!("window {}", self.window),
            format!("input_mode {}", self.input_mode),
            format!("qnet {} {}", self.qnet_channels, self.qnet_hidden),
            format!("qnet_groups {}", list(&self.qnet_groups)),
            format!("vae_latent {}", self.vae_latent),
            format!("vae_layers {layers}"),
            format!("vae_groups {}", list(&self.vae_groups)),
        ]
    }
}

pub fn checkpoint_save(path: &Path, net: &QNetwork, vae: &VaeModel, mode: InputMode) -> Result<(), CheckpointError> {
    let manifest = Manifest::of(net, vae, mode);
    let mut out = format!("{MAGIC} {CHECKPOINT_VERSION}\n");
    for line in manifest.lines() {
        out.push_str(&line);
        out.push('\n');
    }
    for (name, flat) in [("qnet", net.flat_params()), ("vae", vae.flat_params())] {
        let _ = writeln!(out, "params {name} {}", flat.len());
        for v in flat {
            let _ = writeln!(out, "{:016x}", v.to_bits());
        }
    }
    out.push_str("end\n");
    std::fs::write(path, out).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parsed checkpoint contents, not yet bound to models.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub path: PathBuf,
    pub manifest_lines: Vec<String>,
    pub qnet: Vec<f64>,
    pub vae: Vec<f64>,
}

pub fn checkpoint_read(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let corrupt = |line: usize, detail: &str| CheckpointError::Corrupt {
        path: path.to_path_buf(),
        line,
        detail: detail.to_string(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.first().ok_or_else(|| corrupt(1, "empty file"))?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v == CHECKPOINT_VERSION.to_string() => {}
        Some((MAGIC, v)) => {
            return Err(CheckpointError::Version {
                path: path.to_path_buf(),
                found: v.to_string(),
            })
        }
        _ => return Err(corrupt(1, "missing checkpoint header")),
    }
    let mut i = 1;
    let mut manifest_lines = Vec::new();
    while i < lines.len() && !lines[i].starts_with("params ") {
        manifest_lines.push(lines[i].to_string());
        i += 1;
    }
    let mut blocks = Vec::new();
    for name in ["qnet", "vae"] {
        let line = lines.get(i).ok_or_else(|| corrupt(i + 1, "truncated before parameters"))?;
        let count = line
            .strip_prefix("params ")
            .and_then(|rest| rest.strip_prefix(name))
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| corrupt(i + 1, &format!("expected `params {name} <count>`")))?;
        i += 1;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.get(i).ok_or_else(|| corrupt(i + 1, "truncated parameter block"))?;
            let bits = u64::from_str_radix(line.trim(), 16).map_err(|_| corrupt(i + 1, "bad parameter encoding"))?;
            values.push(f64::from_bits(bits));
            i += 1;
        }
        blocks.push(values);
    }
    if lines.get(i).map(|l| l.trim()) != Some("end") {
        return Err(corrupt(i + 1, "missing end marker"));
    }
    let vae = blocks.pop().unwrap_or_default();
    let qnet = blocks.pop().unwrap_or_default();
    Ok(Checkpoint {
        path: path.to_path_buf(),
        manifest_lines,
        qnet,
        vae,
    })
}

impl Checkpoint {
    /// Fills models shaped like the given configuration, refusing any
    /// manifest difference.
    pub fn restore(&self, hidden: usize, mode: InputMode, vae_config: &VaeConfig) -> Result<(QNetwork, VaeModel), CheckpointError> {
        let mut net = QNetwork::zeros(mode.channels(), hidden, vae_config.window);
        let mut vae = VaeModel::zeros(vae_config);
        let expected = Manifest::of(&net, &vae, mode).lines();
        if expected != self.manifest_lines {
            let detail = expected
                .iter()
                .zip(self.manifest_lines.iter().chain(std::iter::repeat(&String::new())))
                .find(|(e, f)| e != f)
                .map(|(e, f)| format!("expected `{e}`, found `{f}`"))
                .unwrap_or_else(|| "manifest has extra lines".to_string());
            return Err(CheckpointError::ManifestMismatch {
                path: self.path.clone(),
                detail,
            });
        }
        let mismatch = |detail: String| CheckpointError::ManifestMismatch {
            path: self.path.clone(),
            detail,
        };
        net.set_flat_params(&self.qnet).map_err(|e| mismatch(e.to_string()))?;
        vae.set_flat_params(&self.vae).map_err(|e| mismatch(e.to_string()))?;
        Ok((net, vae))
    }
}
