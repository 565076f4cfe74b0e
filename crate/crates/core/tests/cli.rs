use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
n = 400
k = 5
d_model = 8
n_heads = 2
n_layers = 1
ffn_dim = 16
rnn_hidden = 4
epochs = 1
batch_size = 32
models = ["vanilla", "hybrid"]
n_runs = 2
n_noise_seeds = 2
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signalfuse"))
        .args(args)
        .env("SIGNALFUSE_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("c.toml");
    fs::write(&path, SMALL).unwrap();
    p(&path).to_string()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn gen_data_is_deterministic_and_writes_meta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&["gen-data", "--config", &cfg, "--out", p(&a)]).status.success());
    assert!(run(&["gen-data", "--config", &cfg, "--out", p(&b)]).status.success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 401);
    assert!(text.lines().next().unwrap().starts_with("time,price,open,high,low,close,volume,next_price"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.meta")).unwrap()).unwrap();
    assert_eq!(meta["command"], "gen-data");
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "no_such_key = 3\n").unwrap();
    let out = run(&["gen-data", "--config", p(&bad), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = small_config(dir.path());
    let out = run(&["train", "--config", &cfg, "--model", "perceptron", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn write_failures_exit_with_two_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    // The output path is an existing directory.
    let out = run(&["gen-data", "--config", &cfg, "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage"));

}

#[test]
fn report_on_an_empty_directory_is_a_usage_error() {
    let empty = tempfile::tempdir().unwrap();
    let out = run(&["report", "--in-dir", p(empty.path()), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let ab = dir.path().join("ab");
    let out = run(&["ablate", "--config", &cfg, "--out-dir", p(&ab)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(ab.join("report.csv")).unwrap();
    assert!(report.starts_with("Model,RMSE,95 % CI,% Improvement vs Vanilla,p-value (paired t),Cohen's d"));
    assert_eq!(report.lines().count(), 3);
    assert!(ab.join("models/hybrid_seed1.model.json").exists());
    assert!(ab.join("models/vanilla_seed0.model.json.meta").exists());

    let out = run(&["noise-sweep", "--config", &cfg, "--models-dir", p(&ab.join("models")), "--out-dir", p(&ab)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ab.join("noise_curve.csv").exists());

    let hybrid = ab.join("models/hybrid_seed0.model.json");
    let out = run(&["trace", "--config", &cfg, "--model-checkpoint", p(&hybrid), "--out-dir", p(&ab), "--gate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ab.join("attention_trace.csv").exists() && ab.join("gate_trace.csv").exists());

    let vanilla = ab.join("models/vanilla_seed0.model.json");
    let out = run(&["trace", "--config", &cfg, "--model-checkpoint", p(&vanilla), "--out-dir", p(&ab), "--gate"]);
    assert_eq!(out.status.code(), Some(1));

    // Rendering reads only the input directory and is repeatable.
    let before = snapshot(&ab);
    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    for (fmt, dst) in [("svg", &r1), ("svg", &r2), ("csv", &r1), ("json", &r1)] {
        let out = run(&["report", "--in-dir", p(&ab), "--format", fmt, "--out-dir", p(dst)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(snapshot(&ab), before);
    let svg = |d: &Path| snapshot(d).into_iter().filter(|(n, _)| n.ends_with(".svg")).collect::<Vec<_>>();
    assert_eq!(svg(&r1), svg(&r2));
    assert!(r1.join("rmse_bars.svg").exists() && r1.join("plot_data.csv").exists());
}
