//! Metrics, paired statistics, the multi-seed ablation, the noise sweep
//! and interpretability traces.

mod ablation;
mod metrics;
mod noise;
mod stats;
mod trace;

pub use ablation::{
    ablation_run, build_report, compare, evaluate, AblationOutput, AblationSpec, Comparison,
    EvalReport, ModelRow, RunFailure, RunResult, TrainedRun,
};
pub use metrics::{mae, pearson, r2, rmse};
pub use noise::{corrupt_windows, noise_sweep, NoiseCurve, NoisePoint, DEFAULT_SIGMAS};
pub use stats::{
    cohens_d_paired, incomplete_beta, ln_gamma, mean_ci95, paired_t_test, student_t_cdf,
    student_t_quantile, TTest,
};
pub use trace::{attention_trace, gate_trace, AttentionTrace, GateRow};
