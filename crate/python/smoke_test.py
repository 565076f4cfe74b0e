"""Smoke test for the signalfuse Python bindings."""

import math
import os
import tempfile

import signalfuse_py as sf

SMALL = """
n = 500
k = 8
d_model = 8
n_heads = 2
n_layers = 1
ffn_dim = 16
rnn_hidden = 4
epochs = 2
batch_size = 32
models = ["linear", "vanilla", "hybrid"]
n_runs = 3
"""


def main():
    s = sf.generate_series(n=300, seed=1)
    assert len(s) == 300
    assert s.to_csv().startswith("time,price,open,high,low,close,volume,next_price")
    assert len(s.feats()[0]) == 3

    cfg = sf.Config(SMALL)
    assert cfg.hash() == sf.Config(cfg.to_toml()).hash()
    try:
        sf.Config("bogus = 1")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown keys must be rejected")

    data = sf.Dataset(cfg)
    assert data.d_f == 9 and data.n_test > 0
    assert all(1 / 3 - 1e-12 <= c <= 1 for c in data.confidences())

    hybrid = sf.train(data, "hybrid", cfg, seed=0)
    vanilla = sf.train(data, "vanilla", cfg, seed=0)
    assert len(hybrid.val_curve) == 2
    preds = hybrid.predict(data)
    assert len(preds) == data.n_test and all(math.isfinite(p) for p in preds)
    m = hybrid.evaluate(data)
    assert abs(m["rmse"] - sf.rmse(preds, data.test_targets())) < 1e-12

    att = hybrid.attention(data, 0)
    for row in att[0][0]:
        assert abs(sum(row) - 1) < 1e-9

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "h.model.json")
        hybrid.save(path)
        assert sf.Model.load(path).predict(data) == preds

    curve = sf.noise_sweep([hybrid, vanilla], data, n_noise_seeds=2)
    zero = [p for p in curve if p["sigma"] == 0.0]
    assert {p["kind"] for p in zero} == {"hybrid", "vanilla"}
    assert all(p["pct_increase"] == 0.0 for p in zero)

    report, runs = sf.ablate(data, cfg)
    assert report.splitlines()[0].startswith("Model,RMSE")
    assert len(runs) == 9

    t, p, df = sf.paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert abs(t - 4.242640687) < 1e-6 and abs(p - 0.013236) < 1e-4 and df == 4
    assert abs(sf.cohens_d_paired([1, 2, 3, 4, 5]) - 1.897366596) < 1e-6
    mean, lo, hi = sf.mean_ci95([1, 2, 3, 4, 5])
    assert lo < mean < hi
    assert abs(sf.signal_confidence([0.0, 0.0, 0.0]) - 1 / 3) < 1e-12
    print("smoke test passed")


if __name__ == "__main__":
    main()
