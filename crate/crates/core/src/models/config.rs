use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Lstm,
    Gru,
    Vanilla,
    Hybrid,
}

impl ModelKind {
    /// Report order: baselines first, the fused model last.
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Linear,
        ModelKind::Lstm,
        ModelKind::Gru,
        ModelKind::Vanilla,
        ModelKind::Hybrid,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
            ModelKind::Vanilla => "vanilla",
            ModelKind::Hybrid => "hybrid",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Linear => "Linear Regression",
            ModelKind::Lstm => "LSTM",
            ModelKind::Gru => "GRU",
            ModelKind::Vanilla => "Vanilla Transformer",
            ModelKind::Hybrid => "Hybrid Signal+Transformer",
        }
    }

    pub fn is_transformer(self) -> bool {
        matches!(self, ModelKind::Vanilla | ModelKind::Hybrid)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lr" | "linreg" => Ok(ModelKind::Linear),
            "lstm" => Ok(ModelKind::Lstm),
            "gru" => Ok(ModelKind::Gru),
            "vanilla" | "transformer" => Ok(ModelKind::Vanilla),
            "hybrid" => Ok(ModelKind::Hybrid),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    /// One gate per model dimension.
    Vector,
    /// One gate per time step, broadcast across dimensions.
    Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Gated,
    Concat,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Last,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Look-back length; windows hold `k + 1` steps.
    pub k: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub rnn_hidden: usize,
    pub gate_mode: GateMode,
    /// Fusion used by the hybrid model. The vanilla model always uses none.
    pub fusion: Fusion,
    pub pooling: Pooling,
    pub positional_encoding: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Linear learning-rate warmup length, in epochs.
    pub warmup_epochs: usize,
    /// Cosine decay floor as a fraction of `lr`.
    pub lr_floor: f64,
    /// Global gradient-norm clip for the recurrent models.
    pub rnn_clip_norm: Option<f64>,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 30,
            d_model: 32,
            n_heads: 4,
            n_layers: 2,
            ffn_dim: 64,
            rnn_hidden: 32,
            gate_mode: GateMode::Vector,
            fusion: Fusion::Gated,
            pooling: Pooling::Last,
            positional_encoding: true,
            epochs: 10,
            batch_size: 64,
            lr: 0.001,
            warmup_epochs: 1,
            lr_floor: 0.1,
            rnn_clip_norm: None,
            ridge_lambda: 1e-6,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return fail(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.d_model == 0 || self.ffn_dim == 0 || self.rnn_hidden == 0 {
            return fail("layer widths must be positive".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be positive".into());
        }
        if !(self.lr >= 0.0) {
            return fail("lr must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.lr_floor) {
            return fail("lr_floor must lie in [0, 1]".into());
        }
        if !(self.ridge_lambda >= 0.0) {
            return fail("ridge_lambda must be non-negative".into());
        }
        if let Some(c) = self.rnn_clip_norm {
            if !(c > 0.0) {
                return fail("rnn_clip_norm must be positive".into());
            }
        }
        Ok(())
    }

    /// Learning rate at optimizer step `step` of `total`: linear warmup,
    /// then cosine decay from `lr` to `lr * lr_floor`.
    pub fn lr_at(&self, step: usize, steps_per_epoch: usize) -> f64 {
        let total = (self.epochs * steps_per_epoch).max(1);
        let warm = (self.warmup_epochs * steps_per_epoch).min(total);
        if step < warm {
            return self.lr * (step + 1) as f64 / warm as f64;
        }
        let span = (total - warm).max(1) as f64;
        let progress = ((step - warm) as f64 / span).min(1.0);
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.lr * (self.lr_floor + (1.0 - self.lr_floor) * cos)
    }

    /// Fusion actually used by a model of `kind`.
    pub fn fusion_for(&self, kind: ModelKind) -> Result<Fusion> {
        match kind {
            ModelKind::Hybrid if self.fusion == Fusion::None => Err(Error::Config(
                "the hybrid model needs fusion = gated or concat".into(),
            )),
            ModelKind::Hybrid => Ok(self.fusion),
            _ => Ok(Fusion::None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heads_must_divide_width() {
        let cfg = ModelConfig { d_model: 30, n_heads: 4, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn vanilla_never_fuses() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.fusion_for(ModelKind::Vanilla).unwrap(), Fusion::None);
        assert_eq!(cfg.fusion_for(ModelKind::Hybrid).unwrap(), Fusion::Gated);
        let none = ModelConfig { fusion: Fusion::None, ..cfg };
        assert!(none.fusion_for(ModelKind::Hybrid).is_err());
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let cfg = ModelConfig { lr: 1.0, epochs: 4, warmup_epochs: 1, lr_floor: 0.1, ..ModelConfig::default() };
        assert_eq!(cfg.lr_at(0, 10), 0.1);
        assert_eq!(cfg.lr_at(9, 10), 1.0);
        assert_eq!(cfg.lr_at(10, 10), 1.0);
        assert!((cfg.lr_at(39, 10) - 0.1).abs() < 0.01);
        let mut prev = f64::INFINITY;
        for s in 10..40 {
            let lr = cfg.lr_at(s, 10);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn kind_parsing() {
        for k in ModelKind::ALL {
            assert_eq!(k.tag().parse::<ModelKind>().unwrap(), k);
        }
        assert!("xgboost".parse::<ModelKind>().is_err());
    }
}
