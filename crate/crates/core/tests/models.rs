mod common;

use common::*;
use signalfuse::autodiff::{grad_check, Graph};
use signalfuse::models::{
    train, Batch, ForwardOptions, Fusion, GateMode, ModelConfig, ModelKind, Pooling, TrainedModel,
};

fn model_grad_error(kind: ModelKind, cfg: &ModelConfig, seed: u64) -> f64 {
    let d_f = 3;
    let (net, params) = perturbed(kind, cfg, d_f, seed);
    let windows = random_windows(2, cfg.k + 1, d_f, seed + 100);
    let batch = Batch::from_slice(&windows).unwrap();
    grad_check(
        |g, p| {
            let out = net.forward(g, p, &batch, &ForwardOptions::default())?;
            let target = g.input(batch.target.clone())?;
            g.mse(out.prediction, target)
        },
        &params,
        1e-5,
    )
    .unwrap()
}

#[test]
fn every_model_matches_finite_differences() {
    for kind in ModelKind::ALL {
        for seed in 0..3 {
            let err = model_grad_error(kind, &tiny_config(seed), seed);
            assert!(err < 1e-4, "{kind} seed {seed}: {err}");
        }
    }
}

#[test]
fn fusion_and_pooling_variants_match_finite_differences() {
    let variants = [
        ModelConfig { fusion: Fusion::Concat, ..tiny_config(0) },
        ModelConfig { gate_mode: GateMode::Scalar, ..tiny_config(1) },
        ModelConfig { pooling: Pooling::Mean, positional_encoding: false, ..tiny_config(2) },
        ModelConfig { n_layers: 2, ..tiny_config(3) },
    ];
    for cfg in variants {
        let err = model_grad_error(ModelKind::Hybrid, &cfg, cfg.seed);
        assert!(err < 1e-4, "{cfg:?}: {err}");
    }
}

fn forward_values(
    kind: ModelKind,
    cfg: &ModelConfig,
    windows: &[signalfuse::synthdata::WindowSample],
    opts: &ForwardOptions,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (net, params) = perturbed(kind, cfg, 3, 5);
    let batch = Batch::from_slice(windows).unwrap();
    let mut g = Graph::new();
    let out = net.forward(&mut g, &params, &batch, opts).unwrap();
    let att = out.attention.iter().map(|a| g.value(*a).values().to_vec()).collect();
    (g.value(out.prediction).values().to_vec(), att)
}

#[test]
fn attention_rows_are_stochastic() {
    let cfg = ModelConfig { n_layers: 2, ..tiny_config(0) };
    let windows = random_windows(3, cfg.k + 1, 3, 9);
    for kind in [ModelKind::Vanilla, ModelKind::Hybrid] {
        let (_, att) = forward_values(kind, &cfg, &windows, &ForwardOptions::default());
        assert_eq!(att.len(), 2);
        for layer in att {
            for row in layer.chunks(cfg.k + 1) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|w| *w >= 0.0));
            }
        }
    }
}

#[test]
fn vanilla_ignores_signals() {
    let cfg = tiny_config(0);
    let windows = random_windows(4, cfg.k + 1, 3, 2);
    let mut flipped = windows.clone();
    let mut r = rng(77);
    for w in &mut flipped {
        for s in &mut w.signals {
            *s = random_signal(&mut r);
        }
    }
    let opts = ForwardOptions::default();
    let (a, _) = forward_values(ModelKind::Vanilla, &cfg, &windows, &opts);
    let (b, _) = forward_values(ModelKind::Vanilla, &cfg, &flipped, &opts);
    assert_eq!(a, b);
    let (c, _) = forward_values(ModelKind::Hybrid, &cfg, &windows, &opts);
    let (d, _) = forward_values(ModelKind::Hybrid, &cfg, &flipped, &opts);
    assert_ne!(c, d);
}

#[test]
fn order_of_steps_matters_to_the_transformer() {
    let cfg = tiny_config(0);
    let windows = random_windows(1, cfg.k + 1, 3, 4);
    let mut swapped = windows.clone();
    let d_f = 3;
    let (a, b) = swapped[0].features.split_at_mut(d_f);
    a.swap_with_slice(&mut b[..d_f]);
    let opts = ForwardOptions::default();
    let (x, _) = forward_values(ModelKind::Vanilla, &cfg, &windows, &opts);
    let (y, _) = forward_values(ModelKind::Vanilla, &cfg, &swapped, &opts);
    assert_ne!(x, y);
}

#[test]
fn gate_override_requires_a_gate() {
    let cfg = tiny_config(0);
    let (net, params) = perturbed(ModelKind::Vanilla, &cfg, 3, 0);
    let batch = Batch::from_slice(&random_windows(1, cfg.k + 1, 3, 0)).unwrap();
    let opts = ForwardOptions { gate_override: Some(1.0) };
    let err = net.forward(&mut Graph::new(), &params, &batch, &opts).unwrap_err();
    assert!(matches!(err, signalfuse::Error::Capability(_)));
}

#[test]
fn same_seed_training_is_bit_identical() {
    let cfg = tiny_config(3);
    let train_w = random_windows(24, cfg.k + 1, 3, 1);
    let val_w = random_windows(8, cfg.k + 1, 3, 2);
    for kind in ModelKind::ALL {
        let a = train(kind, &train_w, &val_w, &cfg).unwrap();
        let b = train(kind, &train_w, &val_w, &cfg).unwrap();
        assert_eq!(a.params, b.params, "{kind}");
        assert_eq!(a.val_curve, b.val_curve);
    }
}

#[test]
fn checkpoint_reload_predicts_identically() {
    let cfg = tiny_config(1);
    let train_w = random_windows(16, cfg.k + 1, 3, 1);
    let val_w = random_windows(6, cfg.k + 1, 3, 2);
    let m = train(ModelKind::Hybrid, &train_w, &val_w, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.model.json");
    m.save(&path).unwrap();
    let back = TrainedModel::load(&path).unwrap();
    assert_eq!(back.predict(&val_w).unwrap(), m.predict(&val_w).unwrap());
    assert_eq!(back.network, m.network);
}

#[test]
fn best_epoch_has_lowest_validation_loss() {
    let cfg = ModelConfig { epochs: 4, ..tiny_config(2) };
    let train_w = random_windows(32, cfg.k + 1, 3, 1);
    let val_w = random_windows(8, cfg.k + 1, 3, 2);
    let m = train(ModelKind::Gru, &train_w, &val_w, &cfg).unwrap();
    let min = m.val_curve.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(m.val_curve[m.best_epoch], min);
    let preds = m.predict(&val_w).unwrap();
    let targets: Vec<f64> = val_w.iter().map(|w| w.target).collect();
    assert!((signalfuse::models::mse(&preds, &targets) - min).abs() < 1e-12);
}

#[test]
fn linear_model_has_flat_curves() {
    let cfg = tiny_config(0);
    let train_w = random_windows(40, cfg.k + 1, 3, 1);
    let val_w = random_windows(8, cfg.k + 1, 3, 2);
    let m = train(ModelKind::Linear, &train_w, &val_w, &cfg).unwrap();
    assert_eq!(m.val_curve.len(), cfg.epochs);
    assert!(m.val_curve.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn untrained_network_predicts_the_anchor() {
    let cfg = tiny_config(0);
    let w = random_windows(3, cfg.k + 1, 3, 0);
    for kind in [ModelKind::Lstm, ModelKind::Gru, ModelKind::Vanilla, ModelKind::Hybrid] {
        let net = signalfuse::models::Network::new(kind, cfg.clone(), 3).unwrap();
        let p = net.init_params(0);
        let pred = net.predict(&p, &w, &ForwardOptions::default()).unwrap();
        for (y, s) in pred.iter().zip(&w) {
            assert_eq!(*y, s.anchor);
        }
    }
}
