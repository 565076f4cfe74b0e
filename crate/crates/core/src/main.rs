use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use signalfuse::config::ExperimentConfig;
use signalfuse::dataset::{prepare_dataset, Dataset};
use signalfuse::eval::{ablation_run, attention_trace, evaluate, gate_trace, noise_sweep};
use signalfuse::models::{train, ModelKind, TrainedModel};
use signalfuse::report::{
    attention_csv, gate_csv, loss_curve_csv, mean_curve, meta_path, noise_csv, render,
    report_csv, runs_csv, write_artifact, Format, Meta,
};
use signalfuse::signalgen::signal_series;
use signalfuse::synthdata::{generate_series, to_csv_string};
use signalfuse::Error;

const WORKERS_ENV: &str = "SIGNALFUSE_WORKERS";

#[derive(Parser)]
#[command(name = "signalfuse", version, about = "Signal-fused transformer forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset with signal columns.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write its checkpoint and loss curve.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train every configured model on every seed and write the comparison table.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Skip writing per-run checkpoints.
        #[arg(long)]
        no_checkpoints: bool,
    },
    /// Evaluate trained checkpoints under test-time feature noise.
    NoiseSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        models_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Export attention (and optionally gate) traces for one test window.
    Trace {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        window_index: usize,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also export per-row gate activations.
        #[arg(long)]
        gate: bool,
    },
    /// Render figures or summaries from the CSVs in a directory.
    Report {
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long, default_value = "svg")]
        format: String,
        /// Defaults to the input directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Failure tagged with the stage it happened in.
struct Failure {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
    .stage("config")
}

fn workers() -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure {
            stage: "config",
            error: Error::Config(format!("{WORKERS_ENV} must be a non-negative integer, got `{v}`")),
        }),
        Err(_) => Ok(0),
    }
}

fn meta(cfg: &ExperimentConfig, seed: u64, command: &str) -> Meta {
    Meta {
        config_hash: cfg.hash(),
        seed,
        command: command.to_string(),
    }
}

fn dataset(cfg: &ExperimentConfig) -> Result<Dataset, Failure> {
    prepare_dataset(&cfg.gen(), &cfg.signal(), &cfg.split(), cfg.k).stage("data")
}

fn checkpoint_name(kind: ModelKind, seed: u64) -> String {
    format!("{}_seed{seed}.model.json", kind.tag())
}

fn save_model(model: &TrainedModel, path: &Path, m: &Meta) -> Result<(), Failure> {
    model.save(path).stage("write")?;
    let text = serde_json::to_string_pretty(m).expect("meta") + "\n";
    signalfuse::util::write_atomic(&meta_path(path), text.as_bytes()).stage("write")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let series = generate_series(&cfg.gen()).stage("generate")?;
            let signals = signal_series(&series, &cfg.signal()).stage("signals")?;
            let text = to_csv_string(&series, Some(&signals)).stage("generate")?;
            write_artifact(&out, &text, &meta(&cfg, cfg.data_seed, "gen-data")).stage("write")?;
            println!("wrote {} bars to {}", series.len(), out.display());
        }
        Command::Train { config, model, out_dir } => {
            let cfg = load_config(config.as_deref())?;
            let kind: ModelKind = model.parse().stage("config")?;
            let data = dataset(&cfg)?;
            let mut trained = train(kind, &data.train, &data.val, &cfg.model()).stage("train")?;
            trained.stats = Some(data.stats.clone());
            let r = evaluate(&trained, &data, cfg.model_seed).stage("evaluate")?;
            let m = meta(&cfg, cfg.model_seed, "train");
            save_model(&trained, &out_dir.join(checkpoint_name(kind, cfg.model_seed)), &m)?;
            let curve = loss_curve_csv(&trained.train_curve, &trained.val_curve);
            write_artifact(&out_dir.join(format!("loss_curve_{}.csv", kind.tag())), &curve, &m).stage("write")?;
            println!(
                "{}: test rmse {:.4}, mae {:.4}, r2 {:.4}, best epoch {}",
                kind.display_name(),
                r.rmse,
                r.mae,
                r.r2,
                trained.best_epoch + 1
            );
        }
        Command::Ablate { config, out_dir, no_checkpoints } => {
            let cfg = load_config(config.as_deref())?;
            let data = dataset(&cfg)?;
            let spec = cfg.ablation(workers()?);
            let out = ablation_run(&data, &cfg.model(), &spec).stage("ablate")?;
            let m = meta(&cfg, cfg.base_seed, "ablate");
            write_artifact(&out_dir.join("report.csv"), &report_csv(&out.report), &m).stage("write")?;
            write_artifact(&out_dir.join("runs.csv"), &runs_csv(&out.runs), &m).stage("write")?;
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "report": out.report,
                "failures": out.failures,
            }))
            .expect("json")
                + "\n";
            write_artifact(&out_dir.join("report.json"), &json, &m).stage("write")?;
            for &kind in &spec.kinds {
                let runs: Vec<_> = out.runs.iter().filter(|r| r.kind == kind).collect();
                if runs.is_empty() {
                    continue;
                }
                let train = mean_curve(runs.iter().map(|r| r.train_curve.as_slice()));
                let val = mean_curve(runs.iter().map(|r| r.val_curve.as_slice()));
                write_artifact(&out_dir.join(format!("loss_curve_{}.csv", kind.tag())), &loss_curve_csv(&train, &val), &m)
                    .stage("write")?;
            }
            if !no_checkpoints {
                let dir = out_dir.join("models");
                for run in &out.models {
                    let mut model = run.model.clone();
                    model.stats = Some(data.stats.clone());
                    let m = meta(&cfg, run.seed, "ablate");
                    save_model(&model, &dir.join(checkpoint_name(model.kind(), run.seed)), &m)?;
                }
            }
            print!("{}", report_csv(&out.report));
            if !out.failures.is_empty() {
                for f in &out.failures {
                    eprintln!("run failed: {} seed {}: {}", f.kind, f.seed, f.message);
                }
                return Err(Failure {
                    stage: "ablate",
                    error: Error::Diverged {
                        epoch: 0,
                        detail: format!("{} of {} runs failed", out.failures.len(), out.failures.len() + out.runs.len()),
                    },
                });
            }
        }
        Command::NoiseSweep { config, models_dir, out_dir } => {
            let cfg = load_config(config.as_deref())?;
            let data = dataset(&cfg)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&models_dir)
                .map_err(|e| Error::Io { path: models_dir.clone(), source: e })
                .stage("load")?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".model.json"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Failure {
                    stage: "load",
                    error: Error::Config(format!("no *.model.json checkpoints in {}", models_dir.display())),
                });
            }
            let mut models = Vec::new();
            for p in &paths {
                let m = TrainedModel::load(p).stage("load")?;
                if m.stats.as_ref().is_some_and(|s| *s != data.stats) {
                    return Err(Failure {
                        stage: "load",
                        error: Error::Config(format!("{} was trained on a different dataset", p.display())),
                    });
                }
                models.push(m);
            }
            let refs: Vec<&TrainedModel> = models.iter().collect();
            let curve = noise_sweep(&refs, &data.test, &data.stats, &cfg.sigmas, cfg.n_noise_seeds, cfg.noise_seed)
                .stage("noise-sweep")?;
            let text = noise_csv(&curve);
            write_artifact(&out_dir.join("noise_curve.csv"), &text, &meta(&cfg, cfg.noise_seed, "noise-sweep"))
                .stage("write")?;
            print!("{text}");
        }
        Command::Trace { config, model_checkpoint, window_index, out_dir, gate } => {
            let cfg = load_config(config.as_deref())?;
            let model = TrainedModel::load(&model_checkpoint).stage("load")?;
            if gate && !model.params.contains("gate.w") {
                return Err(Failure {
                    stage: "trace",
                    error: Error::Capability(format!(
                        "{} has no gate parameters; a gate trace needs a hybrid model with gated fusion",
                        model_checkpoint.display()
                    )),
                });
            }
            let data = dataset(&cfg)?;
            let sample = data.test.get(window_index).ok_or_else(|| Failure {
                stage: "config",
                error: Error::Config(format!("window index {window_index} out of range (0..{})", data.test.len())),
            })?;
            let m = meta(&cfg, model.network.config.seed, "trace");
            let trace = attention_trace(&model, sample).stage("trace")?;
            write_artifact(&out_dir.join("attention_trace.csv"), &attention_csv(&trace), &m).stage("write")?;
            match trace.confidence_correlation() {
                Some(r) => println!("confidence vs received attention: pearson r = {r:.4}"),
                None => println!("confidence vs received attention: undefined (constant series)"),
            }
            if gate {
                let rows = gate_trace(&model, sample).stage("trace")?;
                write_artifact(&out_dir.join("gate_trace.csv"), &gate_csv(&rows), &m).stage("write")?;
            }
        }
        Command::Report { in_dir, format, out_dir } => {
            let format: Format = format.parse().stage("config")?;
            let out_dir = out_dir.unwrap_or_else(|| in_dir.clone());
            let written = render(&in_dir, &out_dir, format).stage("report")?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { stage, error }) => {
            eprintln!("error in stage `{stage}`: {error}");
            match error {
                Error::Config(_) | Error::Capability(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
