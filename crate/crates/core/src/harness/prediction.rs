use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::LogisticConfig;
use crate::engine::{ConditionKind, EpisodeLog};
use crate::error::{Error, Result};
use crate::task::ActionKind;

const N_WEIGHTS: usize = 10;

fn one_hot(obs: [usize; 3]) -> [f64; N_WEIGHTS] {
    let mut x = [0.0; N_WEIGHTS];
    x[0] = 1.0;
    for (f, v) in obs.iter().enumerate() {
        x[1 + 3 * f + v] = 1.0;
    }
    x
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Pooled logistic regression of `P(Call)` on one-hot discretized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: [f64; N_WEIGHTS],
}

impl LogisticModel {
    pub fn prob_call(&self, obs: [usize; 3]) -> f64 {
        let x = one_hot(obs);
        sigmoid(x.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
    }

    pub fn predict(&self, obs: [usize; 3]) -> ActionKind {
        if self.prob_call(obs) > 0.5 {
            ActionKind::Call
        } else {
            ActionKind::Solo
        }
    }

    /// Mean cross-entropy.
    pub fn loss(&self, data: &[([usize; 3], ActionKind)]) -> f64 {
        let total: f64 = data
            .iter()
            .map(|(obs, a)| {
                let p = self.prob_call(*obs).clamp(1e-15, 1.0 - 1e-15);
                if *a == ActionKind::Call {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum();
        total / data.len().max(1) as f64
    }

    /// Batch gradient descent from zero weights. Returns the model and the loss
    /// before each step plus the final loss.
    pub fn fit(data: &[([usize; 3], ActionKind)], cfg: &LogisticConfig) -> (LogisticModel, Vec<f64>) {
        let mut model = LogisticModel { weights: [0.0; N_WEIGHTS] };
        let mut history = Vec::with_capacity(cfg.iterations + 1);
        let n = data.len().max(1) as f64;
        for _ in 0..cfg.iterations {
            history.push(model.loss(data));
            let mut grad = [0.0; N_WEIGHTS];
            for (obs, a) in data {
                let x = one_hot(*obs);
                let err = model.prob_call(*obs) - if *a == ActionKind::Call { 1.0 } else { 0.0 };
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += err * xi / n;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        history.push(model.loss(data));
        (model, history)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    /// `None` for the pooled row.
    pub fold: Option<usize>,
    pub participants: usize,
    pub rounds: usize,
    /// Rounds with an online prediction (model initialized).
    pub tom_rounds: usize,
    pub tom_correct: usize,
    pub majority_correct: usize,
    pub logistic_correct: usize,
}

impl FoldRow {
    pub fn tom_accuracy(&self) -> Option<f64> {
        (self.tom_rounds > 0).then(|| self.tom_correct as f64 / self.tom_rounds as f64)
    }

    pub fn majority_accuracy(&self) -> Option<f64> {
        (self.rounds > 0).then(|| self.majority_correct as f64 / self.rounds as f64)
    }

    pub fn logistic_accuracy(&self) -> Option<f64> {
        (self.rounds > 0).then(|| self.logistic_correct as f64 / self.rounds as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub folds: Vec<FoldRow>,
    pub pooled: FoldRow,
    /// Loss history of the logistic model fitted on all rounds.
    pub loss_history: Vec<f64>,
}

type Sample = ([usize; 3], ActionKind);

/// Online ToM accuracy against majority-class and logistic baselines, with
/// k-fold cross-validation over participants for the baselines.
pub fn prediction_eval(logs: &[EpisodeLog], folds: usize, cfg: &LogisticConfig) -> Result<PredictionReport> {
    if logs.is_empty() {
        return Err(Error::Data("no logs to evaluate".into()));
    }
    let mut ids: Vec<(ConditionKind, u32)> = logs.iter().map(|l| (l.condition, l.participant)).collect();
    ids.sort();
    ids.dedup();
    if folds < 2 || ids.len() < folds {
        return Err(Error::Config(format!("{} participants cannot fill {folds} folds", ids.len())));
    }
    let fold_of: BTreeMap<_, _> = ids.iter().enumerate().map(|(i, id)| (*id, i % folds)).collect();
    let samples = |keep: &dyn Fn(usize) -> bool| -> Vec<Sample> {
        logs.iter()
            .filter(|l| keep(fold_of[&(l.condition, l.participant)]))
            .flat_map(|l| l.rounds.iter().map(|r| (r.key().observation(), r.human_action)))
            .collect()
    };

    let mut rows = Vec::with_capacity(folds);
    for k in 0..folds {
        let train = samples(&|f| f != k);
        let calls = train.iter().filter(|(_, a)| *a == ActionKind::Call).count();
        let majority = if 2 * calls > train.len() { ActionKind::Call } else { ActionKind::Solo };
        let (model, _) = LogisticModel::fit(&train, cfg);
        let mut row = FoldRow {
            fold: Some(k),
            participants: fold_of.values().filter(|&&f| f == k).count(),
            rounds: 0,
            tom_rounds: 0,
            tom_correct: 0,
            majority_correct: 0,
            logistic_correct: 0,
        };
        for log in logs.iter().filter(|l| fold_of[&(l.condition, l.participant)] == k) {
            for r in &log.rounds {
                row.rounds += 1;
                row.majority_correct += (r.human_action == majority) as usize;
                row.logistic_correct += (model.predict(r.key().observation()) == r.human_action) as usize;
                if let Some(p) = r.a_pred {
                    row.tom_rounds += 1;
                    row.tom_correct += (p == r.human_action) as usize;
                }
            }
        }
        rows.push(row);
    }
    let pooled = rows.iter().fold(
        FoldRow { fold: None, participants: 0, rounds: 0, tom_rounds: 0, tom_correct: 0, majority_correct: 0, logistic_correct: 0 },
        |mut acc, r| {
            acc.participants += r.participants;
            acc.rounds += r.rounds;
            acc.tom_rounds += r.tom_rounds;
            acc.tom_correct += r.tom_correct;
            acc.majority_correct += r.majority_correct;
            acc.logistic_correct += r.logistic_correct;
            acc
        },
    );
    let (_, loss_history) = LogisticModel::fit(&samples(&|_| true), cfg);
    Ok(PredictionReport { folds: rows, pooled, loss_history })
}
