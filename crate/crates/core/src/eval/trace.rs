//! Attention and gate traces of a single window.

use serde::{Deserialize, Serialize};

use super::metrics::pearson;
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::models::{Batch, ForwardOptions, GateMode, TrainedModel};
use crate::synthdata::WindowSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub n_layers: usize,
    pub n_heads: usize,
    pub steps: usize,
    /// `weights[layer][head][query][key]`.
    pub weights: Vec<Vec<Vec<Vec<f64>>>>,
    /// Signal confidence of every window row.
    pub confidence: Vec<f64>,
}

impl AttentionTrace {
    /// Attention each key row receives, averaged over layers, heads and queries.
    pub fn received_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.steps];
        let norm = (self.n_layers * self.n_heads * self.steps) as f64;
        for layer in &self.weights {
            for head in layer {
                for q in head {
                    for (m, w) in mass.iter_mut().zip(q) {
                        *m += w / norm;
                    }
                }
            }
        }
        mass
    }

    /// Pearson correlation between row confidence and received attention.
    pub fn confidence_correlation(&self) -> Option<f64> {
        pearson(&self.confidence, &self.received_mass()).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRow {
    pub row: usize,
    /// Gate averaged over model dimensions.
    pub mean_gate: f64,
    pub confidence: f64,
}

fn confidences(sample: &WindowSample) -> Vec<f64> {
    sample.signals.iter().map(|s| s.confidence).collect()
}

pub fn attention_trace(model: &TrainedModel, sample: &WindowSample) -> Result<AttentionTrace> {
    if !model.kind().is_transformer() {
        return Err(Error::Capability(format!(
            "the {} model has no attention layers",
            model.kind()
        )));
    }
    let batch = Batch::from_slice(std::slice::from_ref(sample))?;
    let mut g = Graph::new();
    let out = model
        .network
        .forward(&mut g, &model.params, &batch, &ForwardOptions::default())?;
    let cfg = &model.network.config;
    let t = batch.steps;
    let weights = out
        .attention
        .iter()
        .map(|&a| {
            let v = g.value(a).values();
            (0..cfg.n_heads)
                .map(|h| {
                    (0..t)
                        .map(|q| v[(h * t + q) * t..(h * t + q + 1) * t].to_vec())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AttentionTrace {
        n_layers: cfg.n_layers,
        n_heads: cfg.n_heads,
        steps: t,
        weights,
        confidence: confidences(sample),
    })
}

pub fn gate_trace(model: &TrainedModel, sample: &WindowSample) -> Result<Vec<GateRow>> {
    let batch = Batch::from_slice(std::slice::from_ref(sample))?;
    let mut g = Graph::new();
    let out = model
        .network
        .forward(&mut g, &model.params, &batch, &ForwardOptions::default())?;
    let gate = out.gate.ok_or_else(|| {
        Error::Capability(format!("the {} model has no fusion gate", model.kind()))
    })?;
    let gv = g.value(gate);
    let width = match model.network.config.gate_mode {
        GateMode::Vector => model.network.config.d_model,
        GateMode::Scalar => 1,
    };
    debug_assert_eq!(gv.cols(), width);
    Ok(confidences(sample)
        .into_iter()
        .enumerate()
        .map(|(row, confidence)| GateRow {
            row,
            mean_gate: gv.row(row).iter().sum::<f64>() / width as f64,
            confidence,
        })
        .collect())
}
