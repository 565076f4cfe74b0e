//! Flat TOML experiment configuration.
//!
//! Every key has a default and unknown keys are rejected. The canonical
//! echo (all keys, fixed order) is hashed for provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::AblationSpec;
use crate::models::{Fusion, GateMode, ModelConfig, ModelKind, Pooling};
use crate::signalgen::SignalConfig;
use crate::synthdata::{GenConfig, SplitSpec};
use crate::util::sha256_hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    // data
    pub n: usize,
    pub start_price: f64,
    pub drift: f64,
    pub volatility: f64,
    pub volume_mean: f64,
    pub volume_std: f64,
    pub n_extra_feats: usize,
    pub data_seed: u64,
    // signals
    pub signal_accuracy: f64,
    pub flat_band: f64,
    pub logit_boost_correct: f64,
    pub logit_boost_wrong: f64,
    pub logit_noise_std: f64,
    pub signal_seed: u64,
    // split
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    // model
    pub k: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub rnn_hidden: usize,
    pub gate_mode: GateMode,
    pub fusion: Fusion,
    pub pooling: Pooling,
    pub positional_encoding: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_epochs: usize,
    pub lr_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rnn_clip_norm: Option<f64>,
    pub ridge_lambda: f64,
    pub model_seed: u64,
    // evaluation
    pub models: Vec<ModelKind>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub sigmas: Vec<f64>,
    pub n_noise_seeds: usize,
    pub noise_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let g = GenConfig::default();
        let s = SignalConfig::default();
        let sp = SplitSpec::default();
        let m = ModelConfig::default();
        ExperimentConfig {
            n: g.n,
            start_price: g.start_price,
            drift: g.drift,
            volatility: g.volatility,
            volume_mean: g.volume_mean,
            volume_std: g.volume_std,
            n_extra_feats: g.n_extra_feats,
            data_seed: g.seed,
            signal_accuracy: s.accuracy,
            flat_band: s.flat_band,
            logit_boost_correct: s.logit_boost_correct,
            logit_boost_wrong: s.logit_boost_wrong,
            logit_noise_std: s.logit_noise_std,
            signal_seed: s.seed,
            train_frac: sp.train_frac,
            val_frac: sp.val_frac,
            test_frac: sp.test_frac,
            k: m.k,
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_layers: m.n_layers,
            ffn_dim: m.ffn_dim,
            rnn_hidden: m.rnn_hidden,
            gate_mode: m.gate_mode,
            fusion: m.fusion,
            pooling: m.pooling,
            positional_encoding: m.positional_encoding,
            epochs: m.epochs,
            batch_size: m.batch_size,
            lr: m.lr,
            warmup_epochs: m.warmup_epochs,
            lr_floor: m.lr_floor,
            rnn_clip_norm: m.rnn_clip_norm,
            ridge_lambda: m.ridge_lambda,
            model_seed: m.seed,
            models: ModelKind::ALL.to_vec(),
            n_runs: 10,
            base_seed: 0,
            sigmas: crate::eval::DEFAULT_SIGMAS.to_vec(),
            n_noise_seeds: 10,
            noise_seed: 1234,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.gen().validate()?;
        self.signal().validate()?;
        self.split().validate()?;
        self.model().validate()?;
        if self.n_runs == 0 || self.n_noise_seeds == 0 {
            return Err(Error::Config("n_runs and n_noise_seeds must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("models must not be empty".into()));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("sigmas must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Stable serialization of every key.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        sha256_hex(&self.canonical())
    }

    pub fn gen(&self) -> GenConfig {
        GenConfig {
            n: self.n,
            start_price: self.start_price,
            drift: self.drift,
            volatility: self.volatility,
            volume_mean: self.volume_mean,
            volume_std: self.volume_std,
            n_extra_feats: self.n_extra_feats,
            seed: self.data_seed,
        }
    }

    pub fn signal(&self) -> SignalConfig {
        SignalConfig {
            accuracy: self.signal_accuracy,
            flat_band: self.flat_band,
            logit_boost_correct: self.logit_boost_correct,
            logit_boost_wrong: self.logit_boost_wrong,
            logit_noise_std: self.logit_noise_std,
            seed: self.signal_seed,
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            val_frac: self.val_frac,
            test_frac: self.test_frac,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            k: self.k,
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            ffn_dim: self.ffn_dim,
            rnn_hidden: self.rnn_hidden,
            gate_mode: self.gate_mode,
            fusion: self.fusion,
            pooling: self.pooling,
            positional_encoding: self.positional_encoding,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            warmup_epochs: self.warmup_epochs,
            lr_floor: self.lr_floor,
            rnn_clip_norm: self.rnn_clip_norm,
            ridge_lambda: self.ridge_lambda,
            seed: self.model_seed,
        }
    }

    pub fn ablation(&self, workers: usize) -> AblationSpec {
        AblationSpec {
            kinds: self.models.clone(),
            n_runs: self.n_runs,
            base_seed: self.base_seed,
            workers,
        }
    }
}
