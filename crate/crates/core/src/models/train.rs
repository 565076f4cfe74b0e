//! Mini-batch training with Adam and best-validation checkpointing.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::config::{ModelConfig, ModelKind};
use super::linreg::fit_ridge;
use super::network::{ForwardOptions, Network};
use crate::autodiff::{adam_step, params_from_json, params_to_json, AdamConfig, AdamState, Graph, Params, Tensor};
use crate::error::{Error, Result};
use crate::synthdata::{FeatureStats, WindowSample};
use crate::util::{derive_seed, write_atomic};

pub const MODEL_FORMAT: &str = "signalfuse-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub network: Network,
    pub params: Params,
    /// Mean training MSE per epoch (standardized units).
    pub train_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stats: Option<FeatureStats>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    network: Network,
    train_curve: Vec<f64>,
    val_curve: Vec<f64>,
    best_epoch: usize,
    stats: Option<FeatureStats>,
    params: serde_json::Value,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.network.kind
    }

    pub fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        self.network.predict(&self.params, samples, &ForwardOptions::default())
    }

    pub fn predict_with(&self, samples: &[WindowSample], opts: &ForwardOptions) -> Result<Vec<f64>> {
        self.network.predict(&self.params, samples, opts)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            network: self.network.clone(),
            train_curve: self.train_curve.clone(),
            val_curve: self.val_curve.clone(),
            best_epoch: self.best_epoch,
            stats: self.stats.clone(),
            params: params_to_json(&self.params),
        })
        .expect("model serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value.clone())
            .map_err(|e| Error::Checkpoint(format!("malformed model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let params = params_from_json(&file.params)?;
        file.network.check_params(&params)?;
        Ok(TrainedModel {
            network: file.network,
            params,
            train_curve: file.train_curve,
            val_curve: file.val_curve,
            best_epoch: file.best_epoch,
            stats: file.stats,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_json()).expect("json");
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        TrainedModel::from_json(&value)
    }
}

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len().max(1) as f64
}

fn targets(samples: &[WindowSample]) -> Vec<f64> {
    samples.iter().map(|s| s.target).collect()
}

/// Population std of `target - anchor` over the training windows, or 1 if zero.
pub fn increment_scale(samples: &[WindowSample]) -> f64 {
    let d: Vec<f64> = samples.iter().map(|s| s.target - s.anchor).collect();
    let n = d.len().max(1) as f64;
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        1.0
    }
}

fn check_windows(train: &[WindowSample], val: &[WindowSample]) -> Result<(usize, usize)> {
    let first = train
        .first()
        .ok_or_else(|| Error::Contract("no training windows".into()))?;
    if val.is_empty() {
        return Err(Error::Contract("no validation windows".into()));
    }
    Ok((first.steps(), first.d_f))
}

/// Trains one model. Neural models keep the parameters of the epoch with the
/// lowest validation MSE; linear regression is solved in closed form and its
/// curves repeat the same value every epoch.
pub fn train(
    kind: ModelKind,
    train: &[WindowSample],
    val: &[WindowSample],
    cfg: &ModelConfig,
) -> Result<TrainedModel> {
    let (steps, d_f) = check_windows(train, val)?;
    if steps != cfg.k + 1 {
        return Err(Error::Config(format!(
            "windows hold {steps} steps but k = {} expects {}",
            cfg.k,
            cfg.k + 1
        )));
    }
    let mut network = Network::new(kind, cfg.clone(), d_f)?;
    if kind == ModelKind::Linear {
        return train_linear(network, train, val);
    }
    network.step_scale = increment_scale(train);
    let mut params = network.init_params(cfg.seed);
    let clip = if matches!(kind, ModelKind::Lstm | ModelKind::Gru) {
        cfg.rnn_clip_norm
    } else {
        None
    };
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            lr: cfg.lr,
            clip_norm: clip,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let val_targets = targets(val);
    let opts = ForwardOptions::default();

    let mut train_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let diverged = |e: Error| Error::Diverged {
            epoch,
            detail: e.to_string(),
        };
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let refs: Vec<&WindowSample> = idx.iter().map(|&i| &train[i]).collect();
            let batch = Batch::new(&refs)?;
            let mut g = Graph::new();
            let out = network.forward(&mut g, &params, &batch, &opts).map_err(numeric(diverged))?;
            let target = g.input(batch.target.clone())?;
            let loss = g.mse(out.prediction, target).map_err(numeric(diverged))?;
            sum += g.value(loss).values()[0] * idx.len() as f64;
            let grads = g.backward(loss).map_err(numeric(diverged))?;
            adam.config.lr = cfg.lr_at(step, steps_per_epoch);
            adam_step(&mut params, &grads, &mut adam)?;
            step += 1;
        }
        let train_mse = sum / train.len() as f64;
        let val_pred = network.predict(&params, val, &opts).map_err(numeric(diverged))?;
        let val_mse = mse(&val_pred, &val_targets);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("train MSE {train_mse}, val MSE {val_mse}"),
            });
        }
        train_curve.push(train_mse);
        val_curve.push(val_mse);
        if val_mse < best.0 {
            best = (val_mse, epoch, params.clone());
        }
    }
    Ok(TrainedModel {
        network,
        params: best.2,
        train_curve,
        val_curve,
        best_epoch: best.1,
        stats: None,
    })
}

/// Maps numeric failures to divergence, leaving other errors untouched.
fn numeric(diverged: impl Fn(Error) -> Error) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric { .. } => diverged(e),
        other => other,
    }
}

fn train_linear(network: Network, train: &[WindowSample], val: &[WindowSample]) -> Result<TrainedModel> {
    let rows: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let fit = fit_ridge(&rows, &targets(train), network.config.ridge_lambda)?;
    let mut params = Params::new();
    let p = fit.weights.len();
    params.insert("linreg.w", Tensor::new(vec![p, 1], fit.weights)?);
    params.insert("linreg.b", Tensor::from_vec(vec![fit.intercept]));
    let opts = ForwardOptions::default();
    let train_mse = mse(&network.predict(&params, train, &opts)?, &targets(train));
    let val_mse = mse(&network.predict(&params, val, &opts)?, &targets(val));
    let epochs = network.config.epochs;
    Ok(TrainedModel {
        network,
        params,
        train_curve: vec![train_mse; epochs],
        val_curve: vec![val_mse; epochs],
        best_epoch: 0,
        stats: None,
    })
}
