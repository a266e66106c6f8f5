//! Simulated experiments over the four conditions and their metrics.

mod config;
mod metrics;
mod output;
mod prediction;
mod run;

pub use config::{ExperimentConfig, LogisticConfig};
pub use metrics::{
    bootstrap_mean_diff, compliance, compliance_metrics, contrast, curves_from_scores, final_trial_scores, intervention_rate,
    learning_curves, mean_se, score_rows, window_accuracy, ComplianceRow, Contrast, CurveRow, ScoreRow, WindowAccuracy,
};
pub use output::{log_file_name, read_curves, read_logs, read_scores, write_log, write_logs, write_outputs, ExperimentSummary, LogLine};
pub use prediction::{prediction_eval, FoldRow, LogisticModel, PredictionReport};
pub use run::{participant_seed, run_condition, run_participant, simulate};

use std::sync::Arc;

use crate::engine::{ConditionKind, EpisodeLog};
use crate::error::Result;
use crate::exec::mix_seed;
use crate::policy::{train_policy, Policy};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub policy: Arc<Policy>,
    pub logs: Vec<EpisodeLog>,
    pub curves: Vec<CurveRow>,
    pub compliance: Vec<ComplianceRow>,
    /// Computed from the no-intervention condition when it was run.
    pub predictions: Option<PredictionReport>,
    /// Final-trial contrast between the full system and no intervention.
    pub contrast: Option<Contrast>,
}

/// Trains the policy, runs every configured condition and computes all metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let policy = Arc::new(train_policy(&cfg.engine.spec, &cfg.engine.solver)?);
    run_experiment_with(cfg, policy)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, policy: Arc<Policy>) -> Result<ExperimentResult> {
    let mut logs = Vec::new();
    for &condition in &cfg.conditions {
        logs.extend(run_condition(cfg, &policy, condition)?);
    }
    let control: Vec<EpisodeLog> = logs.iter().filter(|l| l.condition == ConditionKind::None).cloned().collect();
    let predictions = if control.is_empty() { None } else { Some(prediction_eval(&control, cfg.folds, &cfg.logistic)?) };
    let has = |c| cfg.conditions.contains(&c);
    let contrast = if has(ConditionKind::TomXrl) && has(ConditionKind::None) {
        Some(contrast(&logs, ConditionKind::TomXrl, ConditionKind::None, cfg.bootstrap_resamples, mix_seed(cfg.seed, 0xb007))?)
    } else {
        None
    };
    Ok(ExperimentResult { curves: learning_curves(&logs), compliance: compliance_metrics(&logs), policy, logs, predictions, contrast })
}
