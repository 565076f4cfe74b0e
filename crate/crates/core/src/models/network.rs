//! Parameter layout and forward pass shared by every model kind.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::config::{Fusion, GateMode, ModelConfig, ModelKind, Pooling};
use super::fusion::gated_fuse;
use super::recurrent::{gru_encode, lstm_encode};
use super::transformer::{encoder_param_shapes, transformer_encode, EncoderShape};
use crate::autodiff::{Graph, Params, Tensor, Var};
use crate::error::{Error, Result};
use crate::synthdata::WindowSample;
use crate::util::derive_seed;

/// Architecture of a model instance, enough to rebuild its graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub d_f: usize,
    pub steps: usize,
    /// Multiplier applied to the head output before it is added to the anchor.
    pub step_scale: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardOptions {
    /// Replaces the fusion gate with a constant (hybrid with gated fusion only).
    pub gate_override: Option<f64>,
}

/// Graph handles produced by [`Network::forward`].
#[derive(Clone, Debug)]
pub struct Forward {
    /// `[batch, 1]` standardized next-price forecast.
    pub prediction: Var,
    /// `[batch, 1]` raw head output.
    pub increment: Var,
    /// Per encoder layer, `[batch * heads, steps, steps]`.
    pub attention: Vec<Var>,
    /// Fusion gate, `[batch * steps, d_model or 1]`.
    pub gate: Option<Var>,
    /// Pooled representation fed to the head.
    pub pooled: Option<Var>,
}

#[derive(Clone, Copy, PartialEq)]
enum Init {
    Xavier,
    Zeros,
    Ones,
}

impl Network {
    pub fn new(kind: ModelKind, config: ModelConfig, d_f: usize) -> Result<Self> {
        config.validate()?;
        config.fusion_for(kind)?;
        if d_f == 0 {
            return Err(Error::Config("feature width must be positive".into()));
        }
        Ok(Network {
            kind,
            steps: config.k + 1,
            config,
            d_f,
            step_scale: 1.0,
        })
    }

    pub fn fusion(&self) -> Fusion {
        self.config.fusion_for(self.kind).unwrap_or(Fusion::None)
    }

    fn param_specs(&self) -> Vec<(String, Vec<usize>, Init)> {
        let c = &self.config;
        let (d, d_f) = (c.d_model, self.d_f);
        let mut out: Vec<(String, Vec<usize>, Init)> = Vec::new();
        let mut push = |n: &str, s: Vec<usize>, i: Init| out.push((n.to_string(), s, i));
        match self.kind {
            ModelKind::Linear => {
                push("linreg.w", vec![self.steps * d_f, 1], Init::Zeros);
                push("linreg.b", vec![1], Init::Zeros);
                return out;
            }
            ModelKind::Lstm => {
                let h = c.rnn_hidden;
                push("lstm.w_ih", vec![d_f, 4 * h], Init::Xavier);
                push("lstm.w_hh", vec![h, 4 * h], Init::Xavier);
                push("lstm.b", vec![4 * h], Init::Zeros);
                push("head.w", vec![h, 1], Init::Zeros);
            }
            ModelKind::Gru => {
                let h = c.rnn_hidden;
                push("gru.w_ih", vec![d_f, 3 * h], Init::Xavier);
                push("gru.w_hh", vec![h, 3 * h], Init::Xavier);
                push("gru.b_ih", vec![3 * h], Init::Zeros);
                push("gru.b_hh", vec![3 * h], Init::Zeros);
                push("head.w", vec![h, 1], Init::Zeros);
            }
            ModelKind::Vanilla | ModelKind::Hybrid => {
                match self.fusion() {
                    Fusion::None => push("embed.w_x", vec![d_f, d], Init::Xavier),
                    Fusion::Concat => push("embed.w_z", vec![d_f + 4, d], Init::Xavier),
                    Fusion::Gated => {
                        let gw = match c.gate_mode {
                            GateMode::Vector => d,
                            GateMode::Scalar => 1,
                        };
                        push("embed.w_x", vec![d_f, d], Init::Xavier);
                        push("embed.w_s", vec![4, d], Init::Xavier);
                        push("gate.w", vec![d_f + 4, gw], Init::Xavier);
                        push("gate.b", vec![gw], Init::Zeros);
                    }
                }
                for (name, shape) in encoder_param_shapes(c.n_layers, d, c.ffn_dim) {
                    let init = if name.ends_with(".gamma") {
                        Init::Ones
                    } else if shape.len() == 1 {
                        Init::Zeros
                    } else {
                        Init::Xavier
                    };
                    push(&name, shape, init);
                }
                push("head.w", vec![d, 1], Init::Zeros);
            }
        }
        push("head.b", vec![1], Init::Zeros);
        out
    }

    /// Xavier-normal weights, zero biases, unit layer-norm gains and a zero
    /// head, so an untrained network predicts the anchor.
    pub fn init_params(&self, seed: u64) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let mut params = Params::new();
        for (name, shape, init) in self.param_specs() {
            let n: usize = shape.iter().product();
            let values = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Xavier => {
                    let std = (2.0 / (shape[0] + shape[1]) as f64).sqrt();
                    let dist = Normal::new(0.0, std).expect("positive std");
                    (0..n).map(|_| dist.sample(&mut rng)).collect()
                }
            };
            params.insert(name, Tensor::new(shape, values).expect("spec shape"));
        }
        params
    }

    /// Checks that `params` holds every tensor this network reads, with the right shape.
    pub fn check_params(&self, params: &Params) -> Result<()> {
        for (name, shape, _) in self.param_specs() {
            let t = params.get(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        params: &Params,
        batch: &Batch,
        opts: &ForwardOptions,
    ) -> Result<Forward> {
        if batch.steps != self.steps || batch.d_f() != self.d_f {
            return Err(Error::shape(
                "forward",
                format!(
                    "batch of {}×{} for a network expecting {}×{}",
                    batch.steps,
                    batch.d_f(),
                    self.steps,
                    self.d_f
                ),
            ));
        }
        if opts.gate_override.is_some() && self.fusion() != Fusion::Gated {
            return Err(Error::Capability(format!(
                "the {} model has no fusion gate",
                self.kind
            )));
        }
        let (b, t) = (batch.size, self.steps);
        let x = g.input(batch.features.clone())?;

        if self.kind == ModelKind::Linear {
            let flat = g.reshape(x, vec![b, t * self.d_f])?;
            let w = g.param(params, "linreg.w")?;
            let bias = g.param(params, "linreg.b")?;
            let y = g.matmul(flat, w)?;
            let y = g.add_bias(y, bias)?;
            return Ok(Forward {
                prediction: y,
                increment: y,
                attention: Vec::new(),
                gate: None,
                pooled: None,
            });
        }

        let mut attention = Vec::new();
        let mut gate = None;
        let pooled = match self.kind {
            ModelKind::Lstm => {
                let hs = lstm_encode(g, params, x, b, t, self.config.rnn_hidden)?;
                *hs.last().expect("at least one step")
            }
            ModelKind::Gru => {
                let hs = gru_encode(g, params, x, b, t, self.config.rnn_hidden)?;
                *hs.last().expect("at least one step")
            }
            _ => {
                let embedded = match self.fusion() {
                    Fusion::None => {
                        let w = g.param(params, "embed.w_x")?;
                        g.matmul(x, w)?
                    }
                    Fusion::Concat => {
                        let s = g.input(batch.signals.clone())?;
                        let z = g.concat(&[x, s], 1)?;
                        let w = g.param(params, "embed.w_z")?;
                        g.matmul(z, w)?
                    }
                    Fusion::Gated => {
                        let s = g.input(batch.signals.clone())?;
                        let out = gated_fuse(
                            g,
                            params,
                            x,
                            s,
                            self.config.gate_mode,
                            opts.gate_override,
                        )?;
                        gate = Some(out.gate);
                        out.fused
                    }
                };
                let shape = EncoderShape {
                    batch: b,
                    seq: t,
                    n_heads: self.config.n_heads,
                    n_layers: self.config.n_layers,
                    positional: self.config.positional_encoding,
                };
                let enc = transformer_encode(g, params, embedded, shape)?;
                attention = enc.attention;
                match self.config.pooling {
                    Pooling::Last => g.gather_rows(enc.output, &batch.last_rows())?,
                    Pooling::Mean => g.group_mean_rows(enc.output, t)?,
                }
            }
        };
        let w = g.param(params, "head.w")?;
        let bias = g.param(params, "head.b")?;
        let inc = g.matmul(pooled, w)?;
        let inc = g.add_bias(inc, bias)?;
        let scaled = g.scale(inc, self.step_scale)?;
        let anchor = g.input(batch.anchor.clone())?;
        let prediction = g.add(anchor, scaled)?;
        Ok(Forward {
            prediction,
            increment: inc,
            attention,
            gate,
            pooled: Some(pooled),
        })
    }

    /// Standardized forecasts for `samples`, evaluated in chunks.
    pub fn predict(
        &self,
        params: &Params,
        samples: &[WindowSample],
        opts: &ForwardOptions,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(EVAL_CHUNK) {
            let batch = Batch::from_slice(chunk)?;
            let mut g = Graph::new();
            let f = self.forward(&mut g, params, &batch, opts)?;
            out.extend_from_slice(g.value(f.prediction).values());
        }
        Ok(out)
    }
}

pub(crate) const EVAL_CHUNK: usize = 256;

/// Single-window forward pass of the hybrid model.
pub fn hybrid_forward(net: &Network, params: &Params, sample: &WindowSample) -> Result<f64> {
    if net.kind != ModelKind::Hybrid {
        return Err(Error::Contract(format!("expected a hybrid network, got {}", net.kind)));
    }
    Ok(net.predict(params, std::slice::from_ref(sample), &ForwardOptions::default())?[0])
}

/// Single-window forward pass of the vanilla transformer.
pub fn vanilla_forward(net: &Network, params: &Params, sample: &WindowSample) -> Result<f64> {
    if net.kind != ModelKind::Vanilla {
        return Err(Error::Contract(format!("expected a vanilla network, got {}", net.kind)));
    }
    Ok(net.predict(params, std::slice::from_ref(sample), &ForwardOptions::default())?[0])
}
