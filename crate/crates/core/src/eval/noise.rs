//! Test-time Gaussian corruption of standardized structured features.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use super::stats::mean_ci95;
use crate::error::{Error, Result};
use crate::models::{ModelKind, TrainedModel};
use crate::synthdata::{FeatureStats, WindowSample};
use crate::util::derive_seed;

pub const DEFAULT_SIGMAS: [f64; 4] = [0.0, 0.05, 0.10, 0.20];

/// Adds `σ·z` to every standardized feature entry. Noise is drawn per time
/// step, so overlapping windows see the same corrupted bar. Signals, the
/// anchor and the targets are left untouched.
pub fn corrupt_windows(windows: &[WindowSample], sigma: f64, seed: u64) -> Vec<WindowSample> {
    if sigma == 0.0 || windows.is_empty() {
        return windows.to_vec();
    }
    let steps = windows[0].steps();
    let d_f = windows[0].d_f;
    let first = windows.iter().map(|w| w.t + 1 - steps).min().unwrap_or(0);
    let last = windows.iter().map(|w| w.t).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..(last + 1 - first) * d_f)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    windows
        .iter()
        .map(|w| {
            let mut w = w.clone();
            let start = (w.t + 1 - steps - first) * d_f;
            for (x, z) in w.features.iter_mut().zip(&noise[start..]) {
                *x += sigma * z;
            }
            w
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub kind: ModelKind,
    pub sigma: f64,
    pub mean_rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `100 · (rmse(σ) - rmse(0)) / rmse(0)`.
    pub pct_increase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub sigmas: Vec<f64>,
    pub n_noise_seeds: usize,
    pub points: Vec<NoisePoint>,
}

impl NoiseCurve {
    pub fn point(&self, kind: ModelKind, sigma: f64) -> Option<&NoisePoint> {
        self.points.iter().find(|p| p.kind == kind && p.sigma == sigma)
    }
}

fn model_rmse(model: &TrainedModel, windows: &[WindowSample], stats: &FeatureStats) -> Result<f64> {
    let preds: Vec<f64> = model
        .predict(windows)?
        .into_iter()
        .map(|z| stats.price_from_std(z))
        .collect();
    let targets: Vec<f64> = windows.iter().map(|w| w.target_raw).collect();
    rmse(&preds, &targets)
}

fn interval(samples: &[f64], mean: f64) -> (f64, f64) {
    match mean_ci95(samples) {
        Ok((_, lo, hi)) => (lo, hi),
        Err(_) => (mean, mean),
    }
}

/// Per model: RMSE averaged over noise seeds (σ = 0 is evaluated once on
/// the clean windows). Per kind: mean over models with a 95% CI across
/// models, or across noise seeds when there is a single model.
pub fn noise_sweep(
    models: &[&TrainedModel],
    test: &[WindowSample],
    stats: &FeatureStats,
    sigmas: &[f64],
    n_noise_seeds: usize,
    noise_seed: u64,
) -> Result<NoiseCurve> {
    if models.is_empty() || test.is_empty() {
        return Err(Error::Contract("noise sweep needs models and test windows".into()));
    }
    if n_noise_seeds == 0 || sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Config("noise sweep needs noise seeds and non-negative sigmas".into()));
    }
    let corrupted: Vec<Vec<Vec<WindowSample>>> = sigmas
        .iter()
        .map(|&s| {
            if s == 0.0 {
                vec![test.to_vec()]
            } else {
                (0..n_noise_seeds as u64)
                    .map(|j| corrupt_windows(test, s, derive_seed(noise_seed, j)))
                    .collect()
            }
        })
        .collect();

    let mut by_kind: BTreeMap<ModelKind, Vec<&TrainedModel>> = BTreeMap::new();
    for m in models {
        by_kind.entry(m.kind()).or_default().push(m);
    }
    let mut points = Vec::new();
    for (kind, ms) in by_kind {
        let mut clean_mean = None;
        for (si, &sigma) in sigmas.iter().enumerate() {
            let mut per_model = Vec::with_capacity(ms.len());
            let mut per_seed = vec![0.0; corrupted[si].len()];
            for m in &ms {
                let mut acc = 0.0;
                for (j, w) in corrupted[si].iter().enumerate() {
                    let r = model_rmse(m, w, stats)?;
                    per_seed[j] += r / ms.len() as f64;
                    acc += r;
                }
                per_model.push(acc / corrupted[si].len() as f64);
            }
            let mean = per_model.iter().sum::<f64>() / per_model.len() as f64;
            let (ci_lo, ci_hi) = if ms.len() > 1 {
                interval(&per_model, mean)
            } else {
                interval(&per_seed, mean)
            };
            if sigma == 0.0 {
                clean_mean = Some(mean);
            }
            let base = match clean_mean {
                Some(b) => b,
                None => {
                    let c = ms
                        .iter()
                        .map(|m| model_rmse(m, test, stats))
                        .collect::<Result<Vec<f64>>>()?;
                    let b = c.iter().sum::<f64>() / c.len() as f64;
                    clean_mean = Some(b);
                    b
                }
            };
            points.push(NoisePoint {
                kind,
                sigma,
                mean_rmse: mean,
                ci_lo,
                ci_hi,
                pct_increase: 100.0 * (mean - base) / base,
            });
        }
    }
    Ok(NoiseCurve {
        sigmas: sigmas.to_vec(),
        n_noise_seeds,
        points,
    })
}
