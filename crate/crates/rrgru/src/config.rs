//! Run configuration: a flat key=value file overridable by command-line
//! flags of the same names, plus seeded RNG substreams.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{ModelConfig, Variant};
use crate::train::{LossConfig, OtherLoss, TrainConfig};

/// Derive a substream seed from the run seed and a stream name, so init,
/// shuffle, dropout, and fold randomness can be reproduced independently.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ seed
}

pub fn seed_stream(seed: u64, name: &str) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

/// Everything a command needs: model, training, and loss settings plus the
/// file paths of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub lr_scale: f64,
    /// Cross-validation fold count; fold 0 is the held-out validation set
    /// during training.
    pub folds: usize,
    /// Parameter initialization scheme (recorded for reproducibility).
    pub init: String,
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            adadelta_rho: 0.95,
            adadelta_eps: 1e-6,
            lr_scale: 1.0,
            folds: 10,
            init: "glorot_uniform".into(),
            train_file: None,
            test_file: None,
            embeddings: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Read a key=value file ('#' starts a comment) and apply every line.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key=value, got {:?}",
                    path.display(),
                    lineno + 1,
                    raw
                ))
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {}", path.display(), lineno + 1, e))
            })?;
        }
        Ok(())
    }

    /// Apply one key. Keys mirror the struct fields exactly.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {:?} for {}", value, key)))
        }
        match key {
            "d_e" => self.model.d_e = num(key, value)?,
            "d_h" => self.model.d_h = num(key, value)?,
            "k" => self.model.k = num(key, value)?,
            "variant" => {
                self.model.variant = Variant::parse(value).ok_or_else(|| {
                    Error::Config(format!(
                        "unknown variant {:?} (expected full, relation_only, nominals_only, att_bgru)",
                        value
                    ))
                })?
            }
            "batch_size" => self.train.batch_size = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "dropout_embed" => self.train.dropout_embed = num(key, value)?,
            "dropout_hidden" => self.train.dropout_hidden = num(key, value)?,
            "dropout_final" => self.train.dropout_final = num(key, value)?,
            "l2_coeff" => self.train.l2_coeff = num(key, value)?,
            "seed" => self.train.seed = num(key, value)?,
            "m_plus" => self.loss.m_plus = num(key, value)?,
            "m_minus" => self.loss.m_minus = num(key, value)?,
            "gamma" => self.loss.gamma = num(key, value)?,
            "other_loss" => {
                self.loss.other_loss = match value {
                    "negative_only" => OtherLoss::NegativeOnly,
                    "skip" => OtherLoss::Skip,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown other_loss {:?} (expected negative_only or skip)",
                            value
                        )))
                    }
                }
            }
            "adadelta_rho" => self.adadelta_rho = num(key, value)?,
            "adadelta_eps" => self.adadelta_eps = num(key, value)?,
            "lr_scale" => self.lr_scale = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "init" => {
                if value != "glorot_uniform" {
                    return Err(Error::Config(format!(
                        "unsupported init scheme {:?}",
                        value
                    )));
                }
                self.init = value.to_string();
            }
            "train_file" => self.train_file = Some(PathBuf::from(value)),
            "test_file" => self.test_file = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown config key {:?}", other))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.model.d_e == 0 || self.model.d_h == 0 || self.model.k == 0 {
            return err("d_e, d_h, and k must be positive".into());
        }
        if self.train.batch_size == 0 {
            return err("batch_size must be at least 1".into());
        }
        for (name, rate) in [
            ("dropout_embed", self.train.dropout_embed),
            ("dropout_hidden", self.train.dropout_hidden),
            ("dropout_final", self.train.dropout_final),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return err(format!("{} = {} outside [0, 1)", name, rate));
            }
        }
        if self.loss.gamma <= 0.0 {
            return err("gamma must be positive".into());
        }
        if self.loss.m_plus < 0.0 || self.loss.m_minus < 0.0 {
            return err("margins must be nonnegative".into());
        }
        if self.train.l2_coeff < 0.0 {
            return err("l2_coeff must be nonnegative".into());
        }
        if self.folds < 2 {
            return err("folds must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.adadelta_rho) {
            return err(format!("adadelta_rho = {} outside [0, 1)", self.adadelta_rho));
        }
        if self.adadelta_eps <= 0.0 {
            return err("adadelta_eps must be positive".into());
        }
        Ok(())
    }

    /// Serialize the resolved configuration; written next to every
    /// artifact set so the seed and settings are recorded.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{}={}", k, v);
        };
        kv("d_e", self.model.d_e.to_string());
        kv("d_h", self.model.d_h.to_string());
        kv("k", self.model.k.to_string());
        kv("variant", self.model.variant.as_str().to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("epochs", self.train.epochs.to_string());
        kv("dropout_embed", self.train.dropout_embed.to_string());
        kv("dropout_hidden", self.train.dropout_hidden.to_string());
        kv("dropout_final", self.train.dropout_final.to_string());
        kv("l2_coeff", self.train.l2_coeff.to_string());
        kv("seed", self.train.seed.to_string());
        kv("m_plus", self.loss.m_plus.to_string());
        kv("m_minus", self.loss.m_minus.to_string());
        kv("gamma", self.loss.gamma.to_string());
        kv(
            "other_loss",
            match self.loss.other_loss {
                OtherLoss::NegativeOnly => "negative_only".to_string(),
                OtherLoss::Skip => "skip".to_string(),
            },
        );
        kv("adadelta_rho", self.adadelta_rho.to_string());
        kv("adadelta_eps", self.adadelta_eps.to_string());
        kv("lr_scale", self.lr_scale.to_string());
        kv("folds", self.folds.to_string());
        kv("init", self.init.clone());
        for (k, v) in [
            ("train_file", &self.train_file),
            ("test_file", &self.test_file),
            ("embeddings", &self.embeddings),
            ("checkpoint", &self.checkpoint),
        ] {
            if let Some(p) = v {
                kv(k, p.display().to_string());
            }
        }
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}
