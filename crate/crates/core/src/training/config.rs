use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::AdamHyper;
use crate::losses::LossWeights;
use crate::networks::{ArchPlan, NetworkKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of training images.
    pub dir: PathBuf,
    pub max_images: usize,
    /// Images (from the end of the sorted listing) kept out of training for evaluation.
    pub holdout: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            max_images: 2000,
            holdout: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr_encoder: f64,
    pub lr_decoder: f64,
    pub lr_image_disc: f64,
    pub lr_generator: f64,
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        let d = AdamHyper::default();
        Self {
            lr_encoder: d.lr,
            lr_decoder: d.lr,
            lr_image_disc: d.lr,
            lr_generator: d.lr,
            lr_critic: d.lr,
            beta1: d.beta1,
            beta2: d.beta2,
            eps: d.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub steps: u64,
    pub batch_size: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Save checkpoints every this many steps (and always at the end); 0 disables periodic saves.
    pub checkpoint_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            checkpoint_every: 500,
        }
    }
}

/// Everything one experiment depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Single-threaded kernels and zeroed wall-clock columns, for bit-identical reruns.
    pub deterministic: bool,
    /// Target geometry; the code GAN works at `plan.code_resolution()`.
    pub plan: ArchPlan,
    /// Resolution the autoencoder is trained at.
    pub stage1_resolution: usize,
    pub n_critic: usize,
    pub data: DataConfig,
    pub optim: OptimConfig,
    pub losses: LossWeights,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub output: OutputConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            deterministic: false,
            plan: ArchPlan::desk(),
            stage1_resolution: 64,
            n_critic: 5,
            data: DataConfig::default(),
            optim: OptimConfig::default(),
            losses: LossWeights::default(),
            stage1: StageConfig::default(),
            stage2: StageConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    /// Parse TOML, apply `key.path=value` overrides, fill defaults and validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(one_line(&e.to_string())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: TrainConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(one_line(&e.to_string())))?;
        cfg.plan = cfg.plan.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.stage1_plan()
            .validate()
            .map_err(|e| Error::Config(format!("stage-1 plan: {e}")))?;
        if self.stage1_resolution > self.plan.resolution {
            return Err(Error::Config(format!(
                "stage1_resolution {} exceeds target resolution {}",
                self.stage1_resolution, self.plan.resolution
            )));
        }
        if self.n_critic < 1 {
            return Err(Error::Config("n_critic must be >= 1".into()));
        }
        let o = &self.optim;
        for (name, lr) in [
            ("lr_encoder", o.lr_encoder),
            ("lr_decoder", o.lr_decoder),
            ("lr_image_disc", o.lr_image_disc),
            ("lr_generator", o.lr_generator),
            ("lr_critic", o.lr_critic),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {lr}")));
            }
        }
        for (name, b) in [("beta1", o.beta1), ("beta2", o.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(o.eps > 0.0) {
            return Err(Error::Config(format!("eps must be > 0, got {}", o.eps)));
        }
        if self.stage1.batch_size == 0 || self.stage2.batch_size == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        self.losses.validate()
    }

    /// Plan of the autoencoder and image discriminator.
    pub fn stage1_plan(&self) -> ArchPlan {
        self.plan.at_resolution(self.stage1_resolution)
    }

    pub fn hyper(&self, kind: NetworkKind) -> AdamHyper {
        let o = &self.optim;
        let lr = match kind {
            NetworkKind::Encoder => o.lr_encoder,
            NetworkKind::Decoder => o.lr_decoder,
            NetworkKind::ImageDiscriminator => o.lr_image_disc,
            NetworkKind::CodeGenerator | NetworkKind::ImageGenerator => o.lr_generator,
            NetworkKind::CodeCritic | NetworkKind::ImageCritic => o.lr_critic,
        };
        AdamHyper {
            lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
        }
    }

    /// Fully-expanded TOML with every field present.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`TrainConfig::canonical_toml`], hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Set `a.b.c=value`; the value is parsed as TOML and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
