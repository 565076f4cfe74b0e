mod common;

use common::*;
use proptest::prelude::*;

use signalfuse::autodiff::{Graph, Tensor};
use signalfuse::eval::{
    attention_trace, cohens_d_paired, corrupt_windows, mae, mean_ci95, paired_t_test, r2, rmse,
};
use signalfuse::models::{gated_fuse, GateMode, ModelKind, TrainedModel};
use signalfuse::signalgen::{confidence_from_logits, signal_series, SignalConfig};
use signalfuse::synthdata::{generate_series, parse_csv, to_csv_string, GenConfig};

fn gen_config() -> impl Strategy<Value = GenConfig> {
    (2usize..80, 0.5f64..50.0, -1.0f64..1.0, 0.0f64..3.0, 0usize..4, any::<u64>()).prop_map(
        |(n, start_price, drift, volatility, n_extra_feats, seed)| GenConfig {
            n,
            start_price,
            drift,
            volatility,
            n_extra_feats,
            seed,
            ..GenConfig::default()
        },
    )
}

fn sample(min: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, min..24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_bars_are_consistent(cfg in gen_config()) {
        let s = generate_series(&cfg).unwrap();
        prop_assert_eq!(s.len(), cfg.n);
        s.check_invariants().unwrap();
        for b in &s.bars {
            prop_assert!(b.low <= b.open.min(b.close) && b.high >= b.open.max(b.close));
            prop_assert!(b.volume >= 0.0);
        }
    }

    #[test]
    fn csv_round_trip_with_signals(cfg in gen_config(), sig_seed in any::<u64>()) {
        let s = generate_series(&cfg).unwrap();
        let sig = signal_series(&s, &SignalConfig { seed: sig_seed, ..SignalConfig::default() }).unwrap();
        let text = to_csv_string(&s, Some(&sig)).unwrap();
        let (back, back_sig) = parse_csv(&text).unwrap();
        prop_assert_eq!(back.bars, s.bars);
        prop_assert_eq!(back_sig.unwrap(), sig);
    }

    #[test]
    fn confidence_is_bounded(l in prop::array::uniform3(-20.0f64..20.0)) {
        let c = confidence_from_logits(&l);
        prop_assert!((1.0 / 3.0 - 1e-12..=1.0).contains(&c));
    }

    #[test]
    fn error_metrics_are_ordered(pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40)) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let e = rmse(&p, &y).unwrap();
        let a = mae(&p, &y).unwrap();
        prop_assert!(a >= 0.0 && e >= a - 1e-12);
        if let Ok(r) = r2(&p, &y) {
            prop_assert!(r <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn cohens_d_is_scale_invariant(x in sample(2), c in prop_oneof![0.01f64..100.0, -100.0f64..-0.01]) {
        if let Ok(d) = cohens_d_paired(&x) {
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let ds = cohens_d_paired(&scaled).unwrap();
            prop_assert!((ds - c.signum() * d).abs() < 1e-8 * d.abs().max(1.0));
        }
    }

    #[test]
    fn interval_translates_with_data(x in sample(2), shift in -1e3f64..1e3) {
        let (m, lo, hi) = mean_ci95(&x).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let (m2, lo2, hi2) = mean_ci95(&moved).unwrap();
        prop_assert!((m2 - m - shift).abs() < 1e-8);
        prop_assert!((lo2 - lo - shift).abs() < 1e-8);
        prop_assert!((hi2 - hi - shift).abs() < 1e-8);
        prop_assert!(lo <= m && m <= hi);
    }

    #[test]
    fn t_test_is_antisymmetric(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..20)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        match (paired_t_test(&a, &b), paired_t_test(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.t + y.t).abs() < 1e-9 * x.t.abs().max(1.0));
                prop_assert!((x.p_two_tailed - y.p_two_tailed).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x.p_two_tailed));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "asymmetric failure"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn zero_noise_is_identity(seed in any::<u64>(), n in 1usize..6) {
        let w = random_windows(n, 4, 3, seed);
        prop_assert_eq!(corrupt_windows(&w, 0.0, seed), w);
    }

    #[test]
    fn attention_rows_sum_to_one(seed in any::<u64>(), layers in 1usize..3) {
        let cfg = signalfuse::models::ModelConfig { n_layers: layers, ..tiny_config(seed) };
        let (network, params) = perturbed(ModelKind::Hybrid, &cfg, 3, seed);
        let model = TrainedModel {
            network,
            params,
            train_curve: vec![],
            val_curve: vec![],
            best_epoch: 0,
            stats: None,
        };
        let w = random_windows(1, cfg.k + 1, 3, seed ^ 1);
        let tr = attention_trace(&model, &w[0]).unwrap();
        prop_assert_eq!(tr.weights.len(), layers);
        for head in tr.weights.iter().flatten() {
            for row in head {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn gate_extremes_select_a_branch(seed in any::<u64>(), scalar in any::<bool>()) {
        let mode = if scalar { GateMode::Scalar } else { GateMode::Vector };
        let cfg = signalfuse::models::ModelConfig { gate_mode: mode, ..tiny_config(seed) };
        let (_, params) = perturbed(ModelKind::Hybrid, &cfg, 3, seed);
        let mut r = rng(seed);
        let x = random_tensor(&mut r, &[5, 3], 1.0);
        let s = random_tensor(&mut r, &[5, 4], 1.0);
        let fused_at = |v: Option<f64>| {
            let mut g = Graph::new();
            let xv = g.input(x.clone()).unwrap();
            let sv = g.input(s.clone()).unwrap();
            let out = gated_fuse(&mut g, &params, xv, sv, mode, v).unwrap();
            g.value(out.fused).clone()
        };
        let project = |t: &Tensor, name: &str| {
            let mut g = Graph::new();
            let a = g.input(t.clone()).unwrap();
            let w = g.param(&params, name).unwrap();
            let y = g.matmul(a, w).unwrap();
            g.value(y).clone()
        };
        let close = |a: &Tensor, b: &Tensor| {
            a.values().iter().zip(b.values()).all(|(p, q)| (p - q).abs() < 1e-12)
        };
        prop_assert!(close(&fused_at(Some(1.0)), &project(&s, "embed.w_s")));
        prop_assert!(close(&fused_at(Some(0.0)), &project(&x, "embed.w_x")));
        let free = fused_at(None);
        let (lo, hi) = (project(&x, "embed.w_x"), project(&s, "embed.w_s"));
        for ((f, a), b) in free.values().iter().zip(lo.values()).zip(hi.values()) {
            prop_assert!(*f >= a.min(*b) - 1e-12 && *f <= a.max(*b) + 1e-12);
        }
    }
}
