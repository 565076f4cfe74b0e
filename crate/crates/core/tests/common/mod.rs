#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use signalfuse::autodiff::{Graph, Params, Tensor, Var};
use signalfuse::models::{ModelConfig, ModelKind, Network};
use signalfuse::signalgen::{encode_one_hot, Direction, LlmSignal};
use signalfuse::synthdata::WindowSample;
use signalfuse::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| scale * normal(rng)).collect()).unwrap()
}

pub fn random_signal(rng: &mut ChaCha8Rng) -> LlmSignal {
    let d = Direction::ALL[rng.gen_range(0..3)];
    LlmSignal {
        direction: d,
        one_hot: encode_one_hot(d),
        confidence: rng.gen_range(1.0 / 3.0..1.0),
        usable: true,
    }
}

pub fn random_windows(n: usize, steps: usize, d_f: usize, seed: u64) -> Vec<WindowSample> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let features: Vec<f64> = (0..steps * d_f).map(|_| normal(&mut r)).collect();
            let anchor = features[(steps - 1) * d_f];
            WindowSample {
                t: steps - 1 + i,
                d_f,
                signals: (0..steps).map(|_| random_signal(&mut r)).collect(),
                target: anchor + 0.3 * normal(&mut r),
                target_raw: 0.0,
                anchor,
                anchor_raw: 0.0,
                features,
            }
        })
        .collect()
}

pub fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        k: 3,
        d_model: 4,
        n_heads: 2,
        n_layers: 1,
        ffn_dim: 6,
        rnn_hidden: 3,
        epochs: 2,
        batch_size: 4,
        seed,
        ..ModelConfig::default()
    }
}

/// Network plus parameters drawn at a scale where every path carries gradient.
pub fn perturbed(kind: ModelKind, cfg: &ModelConfig, d_f: usize, seed: u64) -> (Network, Params) {
    let mut net = Network::new(kind, cfg.clone(), d_f).unwrap();
    net.step_scale = 0.7;
    let base = net.init_params(seed);
    let mut r = rng(seed ^ 0xABCD);
    let mut p = Params::new();
    for (name, t) in base.iter() {
        p.insert(name.clone(), random_tensor(&mut r, t.shape(), 0.5));
    }
    (net, p)
}

/// `mean(out ⊙ R)` for a fixed random `R`, so every output entry matters.
pub fn weighted_mean(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let shape = g.value(out).shape().to_vec();
    let w = random_tensor(&mut rng(seed), &shape, 1.0);
    let w = g.input(w)?;
    let prod = g.mul(out, w)?;
    g.mean(prod)
}

// ---- reference statistics, independent of the library ----------------------

fn t_kernel(x: f64, df: f64) -> f64 {
    (1.0 + x * x / df).powf(-(df + 1.0) / 2.0)
}

/// `∫_a^∞` of the unnormalized t density, via `x = a + u/(1-u)` and Simpson's rule.
fn t_tail_mass(a: f64, df: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let g = |u: f64| {
        let u = u.min(1.0 - 1e-9);
        let x = a + u / (1.0 - u);
        t_kernel(x, df) / ((1.0 - u) * (1.0 - u))
    };
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

/// Two-tailed `P(|T| ≥ |t|)` by numerical integration.
pub fn oracle_p_two_tailed(t: f64, df: f64) -> f64 {
    t_tail_mass(t.abs(), df) / t_tail_mass(0.0, df)
}

/// `t` with `P(T ≤ t) = p`, for `p > 0.5`, by bisection on the integrated tail.
pub fn oracle_t_quantile(p: f64, df: f64) -> f64 {
    let total = t_tail_mass(0.0, df);
    let target = 2.0 * (1.0 - p);
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if t_tail_mass(mid, df) / total > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn oracle_mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Fixed difference vectors used to compare against the library.
pub fn oracle_vectors() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 2.0, 3.0, 4.0, 5.0],
        vec![0.5, -0.2, 0.9, 1.4, 0.3, 0.8],
        vec![-1.0, -2.5, -0.5, -3.0],
        vec![10.0, 12.0],
        vec![0.01, 0.02, -0.005, 0.015, 0.03, 0.0, 0.012, 0.007, 0.02, 0.011],
        vec![3.0, -3.0, 2.0, -2.0, 1.0, -1.0, 0.5],
        vec![100.0, 101.5, 99.0, 102.0, 100.5, 98.5, 103.0, 97.0, 100.0, 101.0, 99.5, 100.2],
        vec![0.001, 0.0012, 0.0009],
        vec![-5.5, 2.25, 7.125, -0.75, 4.0, 1.5, -2.0, 3.25, 0.5, 6.0, -1.25, 2.75, 0.0, 5.0, 1.0],
        vec![2.2, 2.4, 2.1, 2.6, 2.3, 2.5, 2.2, 2.4, 2.35, 2.45],
    ]
}
