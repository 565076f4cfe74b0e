//! Multi-seed ablation: every model kind trained on the same seeds and
//! compared against the vanilla transformer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, r2, rmse};
use super::stats::{cohens_d_paired, mean_ci95, paired_t_test};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{train, ModelConfig, ModelKind, TrainedModel};

/// Test metrics of one trained model, in price units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: ModelKind,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub train_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub kind: ModelKind,
    pub seed: u64,
    pub message: String,
}

/// Evaluates a trained model on the dataset's test windows.
pub fn evaluate(model: &TrainedModel, data: &Dataset, seed: u64) -> Result<RunResult> {
    let preds: Vec<f64> = model
        .predict(&data.test)?
        .into_iter()
        .map(|z| data.stats.price_from_std(z))
        .collect();
    let targets = data.test_targets_raw();
    Ok(RunResult {
        kind: model.kind(),
        seed,
        rmse: rmse(&preds, &targets)?,
        mae: mae(&preds, &targets)?,
        r2: r2(&preds, &targets)?,
        train_curve: model.train_curve.clone(),
        val_curve: model.val_curve.clone(),
        best_epoch: model.best_epoch,
    })
}

/// Paired comparison of a model against the reference, on shared seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `(reference_mean - model_mean) / reference_mean`.
    pub improvement: f64,
    pub t: f64,
    pub p_value: f64,
    /// Positive when the model has the lower RMSE.
    pub cohens_d: f64,
}

/// Compares per-seed RMSE lists paired by position.
pub fn compare(model: &[f64], reference: &[f64]) -> Result<Comparison> {
    let test = paired_t_test(reference, model)?;
    let diffs: Vec<f64> = reference.iter().zip(model).map(|(r, m)| r - m).collect();
    let d = cohens_d_paired(&diffs)?;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let (mm, rm) = (mean(model), mean(reference));
    Ok(Comparison {
        improvement: (rm - mm) / rm,
        t: test.t,
        p_value: test.p_two_tailed,
        cohens_d: d,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub kind: ModelKind,
    pub n_runs: usize,
    pub mean_rmse: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub mean_mae: Option<f64>,
    pub mean_r2: Option<f64>,
    pub comparison: Option<Comparison>,
    /// Why a cell is empty, when it is.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub reference: ModelKind,
    pub n_runs: usize,
    pub rows: Vec<ModelRow>,
}

impl EvalReport {
    pub fn row(&self, kind: ModelKind) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Aggregates runs into one row per kind. Comparisons use the seeds that
/// both the model and the reference completed.
pub fn build_report(runs: &[RunResult], kinds: &[ModelKind], reference: ModelKind) -> EvalReport {
    let by_seed = |k: ModelKind| {
        let mut v: Vec<&RunResult> = runs.iter().filter(|r| r.kind == k).collect();
        v.sort_by_key(|r| r.seed);
        v
    };
    let reference_runs = by_seed(reference);
    let mut n_runs = 0;
    let rows = kinds
        .iter()
        .map(|&kind| {
            let mine = by_seed(kind);
            n_runs = n_runs.max(mine.len());
            let mean = |f: fn(&RunResult) -> f64| {
                (!mine.is_empty()).then(|| mine.iter().map(|r| f(r)).sum::<f64>() / mine.len() as f64)
            };
            let rmses: Vec<f64> = mine.iter().map(|r| r.rmse).collect();
            let mut notes = Vec::new();
            let ci95 = match mean_ci95(&rmses) {
                Ok((_, lo, hi)) => Some((lo, hi)),
                Err(e) => {
                    notes.push(format!("ci: {e}"));
                    None
                }
            };
            let (a, b): (Vec<f64>, Vec<f64>) = mine
                .iter()
                .filter_map(|r| {
                    reference_runs
                        .iter()
                        .find(|x| x.seed == r.seed)
                        .map(|x| (r.rmse, x.rmse))
                })
                .unzip();
            let comparison = match compare(&a, &b) {
                Ok(c) => Some(c),
                Err(e) => {
                    notes.push(format!("comparison: {e}"));
                    None
                }
            };
            ModelRow {
                kind,
                n_runs: mine.len(),
                mean_rmse: mean(|r| r.rmse),
                ci95,
                mean_mae: mean(|r| r.mae),
                mean_r2: mean(|r| r.r2),
                comparison,
                note: (!notes.is_empty()).then(|| notes.join("; ")),
            }
        })
        .collect();
    EvalReport {
        reference,
        n_runs,
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub kinds: Vec<ModelKind>,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Worker threads; 0 means rayon's default.
    pub workers: usize,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            kinds: ModelKind::ALL.to_vec(),
            n_runs: 10,
            base_seed: 0,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub seed: u64,
    pub model: TrainedModel,
}

#[derive(Clone, Debug)]
pub struct AblationOutput {
    pub report: EvalReport,
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    pub models: Vec<TrainedRun>,
}

/// Trains every kind on seeds `base_seed .. base_seed + n_runs`. Failed runs
/// are recorded and skipped; the report is built from the rest.
pub fn ablation_run(data: &Dataset, cfg: &ModelConfig, spec: &AblationSpec) -> Result<AblationOutput> {
    if spec.n_runs == 0 || spec.kinds.is_empty() {
        return Err(Error::Config("ablation needs at least one run and one model".into()));
    }
    let jobs: Vec<(u64, ModelKind)> = (0..spec.n_runs as u64)
        .flat_map(|i| spec.kinds.iter().map(move |&k| (spec.base_seed + i, k)))
        .collect();
    let work = |&(seed, kind): &(u64, ModelKind)| {
        let cfg = ModelConfig { seed, ..cfg.clone() };
        let out = train(kind, &data.train, &data.val, &cfg)
            .and_then(|m| evaluate(&m, data, seed).map(|r| (r, m)));
        (seed, kind, out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(work).collect());

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut models = Vec::new();
    for (seed, kind, out) in results {
        match out {
            Ok((r, m)) => {
                runs.push(r);
                models.push(TrainedRun { seed, model: m });
            }
            Err(e) => failures.push(RunFailure {
                kind,
                seed,
                message: e.to_string(),
            }),
        }
    }
    let report = build_report(&runs, &spec.kinds, ModelKind::Vanilla);
    Ok(AblationOutput {
        report,
        runs,
        failures,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(kind: ModelKind, seed: u64, rmse: f64) -> RunResult {
        RunResult {
            kind,
            seed,
            rmse,
            mae: rmse / 2.0,
            r2: 0.5,
            train_curve: vec![],
            val_curve: vec![],
            best_epoch: 0,
        }
    }

    #[test]
    fn self_comparison_is_degenerate() {
        let runs: Vec<RunResult> = (0..4)
            .flat_map(|s| {
                [
                    run(ModelKind::Vanilla, s, 10.0 + s as f64),
                    run(ModelKind::Hybrid, s, 9.0 + 0.5 * s as f64),
                ]
            })
            .collect();
        let rep = build_report(&runs, &[ModelKind::Vanilla, ModelKind::Hybrid], ModelKind::Vanilla);
        let v = rep.row(ModelKind::Vanilla).unwrap();
        assert!(v.comparison.is_none());
        assert!(v.note.as_deref().unwrap().contains("degenerate"));
        let h = rep.row(ModelKind::Hybrid).unwrap();
        let c = h.comparison.unwrap();
        assert!(c.improvement > 0.0 && c.cohens_d > 0.0 && c.t > 0.0);
    }

    #[test]
    fn run_order_does_not_matter() {
        let mut runs: Vec<RunResult> = (0..5)
            .flat_map(|s| {
                [
                    run(ModelKind::Vanilla, s, 10.0 + (s * s) as f64),
                    run(ModelKind::Lstm, s, 11.0 + s as f64),
                ]
            })
            .collect();
        let kinds = [ModelKind::Lstm, ModelKind::Vanilla];
        let a = build_report(&runs, &kinds, ModelKind::Vanilla);
        runs.reverse();
        runs.swap(1, 6);
        let b = build_report(&runs, &kinds, ModelKind::Vanilla);
        assert_eq!(a, b);
    }
}
