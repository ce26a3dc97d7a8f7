//! Flat `key=value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every hyperparameter has a
//! default, so an empty file is a valid configuration. Command-line flags
//! are applied on top with [`RunConfig::set`], so flags win.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::checkpoint::hex;
use crate::encoder::ModelConfig;
use crate::training::optim::{Schedule, ScheduleKind};
use crate::{Error, Result};

pub const SEED_ENV: &str = "PZERO_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub max_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub window_sentences: usize,
    pub min_count: usize,
    pub mask_rate: f64,
    pub max_lr: f64,
    pub warmup_steps: usize,
    /// `None` picks inverse_sqrt for pretraining and finetune_default for
    /// finetuning.
    pub kind: Option<ScheduleKind>,
    pub batch_size: usize,
    pub updates: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub eval_interval: usize,
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 64,
            max_len: 128,
            layers: 2,
            heads: 2,
            ff_dim: 128,
            window_sentences: 4,
            min_count: 1,
            mask_rate: 0.15,
            max_lr: 1e-3,
            warmup_steps: 100,
            kind: None,
            batch_size: 32,
            updates: 2000,
            max_epochs: 200,
            patience: 20,
            eval_interval: 100,
            seed: None,
            corpus: None,
            vocab: None,
            instances: None,
            dev: None,
            checkpoint: None,
            output: None,
            reports: None,
        }
    }
}

const PATH_KEYS: [&str; 7] = ["corpus", "vocab", "instances", "dev", "checkpoint", "output", "reports"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            c.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key. Model size keys accept both spellings (`D` / `dim`,
    /// `T_max` / `max_len`, `n` / `window_sentences`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "D" | "dim" => self.dim = parse(key, value)?,
            "T_max" | "max_len" => self.max_len = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "heads" => self.heads = parse(key, value)?,
            "ff_dim" => self.ff_dim = parse(key, value)?,
            "n" | "window_sentences" => self.window_sentences = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "mask_rate" => self.mask_rate = parse(key, value)?,
            "max_lr" => self.max_lr = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = parse(key, value)?,
            "kind" => self.kind = Some(parse(key, value)?),
            "batch_size" => self.batch_size = parse(key, value)?,
            "updates" => self.updates = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "corpus" => self.corpus = Some(value.into()),
            "vocab" => self.vocab = Some(value.into()),
            "instances" => self.instances = Some(value.into()),
            "dev" => self.dev = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "output" => self.output = Some(value.into()),
            "reports" => self.reports = Some(value.into()),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if self.window_sentences == 0 {
            return bad("n must be positive");
        }
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return bad("mask_rate must lie in (0, 1)");
        }
        self.model_config(crate::vocab::SPECIALS.len())?;
        self.schedule(ScheduleKind::InverseSqrt).validate()
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let c = ModelConfig {
            vocab_size,
            dim: self.dim,
            max_len: self.max_len,
            layers: self.layers,
            heads: self.heads,
            ff_dim: self.ff_dim,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn schedule(&self, default_kind: ScheduleKind) -> Schedule {
        Schedule {
            max_lr: self.max_lr,
            warmup_steps: self.warmup_steps,
            kind: self.kind.unwrap_or(default_kind),
        }
    }

    /// Seed precedence: explicit value, then `PZERO_SEED`, then the default.
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("{SEED_ENV}=`{v}`: {e}"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    /// Canonical `key=value` listing of every hyperparameter, paths and
    /// seed excluded.
    pub fn canonical(&self) -> String {
        let kind = match self.kind {
            None => "default",
            Some(ScheduleKind::InverseSqrt) => "inverse_sqrt",
            Some(ScheduleKind::FinetuneDefault) => "finetune_default",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("D", self.dim.to_string()),
            ("T_max", self.max_len.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("ff_dim", self.ff_dim.to_string()),
            ("heads", self.heads.to_string()),
            ("kind", kind.to_string()),
            ("layers", self.layers.to_string()),
            ("mask_rate", format!("{:?}", self.mask_rate)),
            ("max_epochs", self.max_epochs.to_string()),
            ("max_lr", format!("{:?}", self.max_lr)),
            ("min_count", self.min_count.to_string()),
            ("n", self.window_sentences.to_string()),
            ("patience", self.patience.to_string()),
            ("updates", self.updates.to_string()),
            ("warmup_steps", self.warmup_steps.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }

    /// Required path or a configuration error naming the key.
    pub fn require_path<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        debug_assert!(PATH_KEYS.contains(&key));
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing `{key}` (set it in the config file or pass a flag)")))
    }
}
