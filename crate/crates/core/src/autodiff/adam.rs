use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::{Gradients, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape())))
                .collect::<BTreeMap<_, _>>()
        };
        AdamState {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.v.get(name)
    }
}

/// One bias-corrected Adam update. Parameters without a gradient are treated
/// as having a zero gradient.
pub fn adam_step(params: &mut Params, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    for (name, g) in grads.iter() {
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("`{name}`: param {:?} vs grad {:?}", p.shape(), g.shape()),
            ));
        }
    }
    let cfg = state.config;
    let clip = match cfg.clip_norm {
        Some(max) => {
            let norm = grads.global_norm();
            if norm > max {
                max / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let param = params.get_mut(&name)?;
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.shape()));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.shape()));
        if m.shape() != param.shape() {
            return Err(Error::shape("adam_step", format!("moment shape for `{name}`")));
        }
        let grad = grads.get(&name);
        for i in 0..param.len() {
            let gi = grad.map_or(0.0, |g| g.values()[i]) * clip;
            let mi = cfg.beta1 * m.values()[i] + (1.0 - cfg.beta1) * gi;
            let vi = cfg.beta2 * v.values()[i] + (1.0 - cfg.beta2) * gi * gi;
            m.values_mut()[i] = mi;
            v.values_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            param.values_mut()[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
