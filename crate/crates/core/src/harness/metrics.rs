use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ConditionKind, EpisodeLog, RoundRecord};
use crate::error::{Error, Result};
use crate::task::ActionKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub condition: ConditionKind,
    pub participant: u32,
    pub profile: String,
    pub trial: u32,
    pub training: bool,
    pub score: f64,
}

/// One row per (participant, completed trial).
pub fn score_rows(logs: &[EpisodeLog]) -> Vec<ScoreRow> {
    let mut rows = Vec::new();
    for log in logs {
        let mut training = BTreeMap::new();
        for r in &log.rounds {
            training.insert(r.trial, r.training);
        }
        for (i, &score) in log.trial_scores.iter().enumerate() {
            let trial = i as u32 + 1;
            rows.push(ScoreRow {
                condition: log.condition,
                participant: log.participant,
                profile: log.profile.clone(),
                trial,
                training: training.get(&trial).copied().unwrap_or(false),
                score,
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub condition: ConditionKind,
    pub trial: u32,
    pub mean: f64,
    /// Standard error of the mean; undefined for fewer than two participants.
    pub se: Option<f64>,
    pub n: usize,
    pub training: bool,
}

/// Mean and standard error of a sample (se needs n >= 2).
pub fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

pub fn curves_from_scores(rows: &[ScoreRow]) -> Vec<CurveRow> {
    let mut groups: BTreeMap<(ConditionKind, u32), (Vec<f64>, bool)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.condition, r.trial)).or_default();
        g.0.push(r.score);
        g.1 |= r.training;
    }
    groups
        .into_iter()
        .map(|((condition, trial), (scores, training))| {
            let (mean, se) = mean_se(&scores);
            CurveRow { condition, trial, mean, se, n: scores.len(), training }
        })
        .collect()
}

pub fn learning_curves(logs: &[EpisodeLog]) -> Vec<CurveRow> {
    curves_from_scores(&score_rows(logs))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplianceRow {
    pub condition: Option<ConditionKind>,
    pub interventions: usize,
    pub followed: usize,
    pub short_term: Option<f64>,
    /// Interventions whose emphasized edge was missing at issue time and that
    /// were followed by a structure pass.
    pub long_term_eligible: usize,
    pub long_term_adopted: usize,
    pub long_term: Option<f64>,
    pub tips: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn accumulate(row: &mut ComplianceRow, rounds: &[RoundRecord]) {
    for (i, r) in rounds.iter().enumerate() {
        row.tips += r.tip.is_some() as usize;
        let Some(iv) = &r.intervention else { continue };
        row.interventions += 1;
        row.followed += (r.human_action == iv.recommended) as usize;
        if r.parents_before.contains(&iv.feature) {
            continue;
        }
        if let Some(after) = rounds[i..].iter().find(|s| s.maintenance) {
            row.long_term_eligible += 1;
            row.long_term_adopted += after.parents_after.contains(&iv.feature) as usize;
        }
    }
}

fn finish(mut row: ComplianceRow) -> ComplianceRow {
    row.short_term = ratio(row.followed, row.interventions);
    row.long_term = ratio(row.long_term_adopted, row.long_term_eligible);
    row
}

/// Pooled short- and long-term compliance over all logs.
pub fn compliance(logs: &[EpisodeLog]) -> ComplianceRow {
    let mut row = ComplianceRow::default();
    for log in logs {
        accumulate(&mut row, &log.rounds);
    }
    finish(row)
}

/// One row per condition present in `logs`.
pub fn compliance_metrics(logs: &[EpisodeLog]) -> Vec<ComplianceRow> {
    let mut by: BTreeMap<ConditionKind, ComplianceRow> = BTreeMap::new();
    for log in logs {
        let row = by.entry(log.condition).or_insert_with(|| ComplianceRow { condition: Some(log.condition), ..Default::default() });
        accumulate(row, &log.rounds);
    }
    by.into_values().map(finish).collect()
}

/// (interventions, rounds) across `logs`.
pub fn intervention_rate(logs: &[EpisodeLog]) -> (usize, usize) {
    logs.iter().fold((0, 0), |(i, n), l| (i + l.rounds.iter().filter(|r| r.intervention.is_some()).count(), n + l.rounds.len()))
}

/// Score of the last completed trial of every participant in `condition`.
pub fn final_trial_scores(logs: &[EpisodeLog], condition: ConditionKind) -> Vec<f64> {
    logs.iter().filter(|l| l.condition == condition).filter_map(|l| l.trial_scores.last().copied()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub treatment: ConditionKind,
    pub control: ConditionKind,
    pub n_treatment: usize,
    pub n_control: usize,
    pub difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Difference of means `a - b` with a percentile bootstrap 95% interval.
pub fn bootstrap_mean_diff(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("bootstrap needs two nonempty samples".into()));
    }
    if resamples == 0 {
        return Err(Error::config("bootstrap_resamples must be positive"));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resample = |xs: &[f64]| (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).sum::<f64>() / xs.len() as f64;
    let mut diffs: Vec<f64> = (0..resamples).map(|_| resample(a) - resample(b)).collect();
    diffs.sort_by(f64::total_cmp);
    let q = |p: f64| diffs[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((mean(a) - mean(b), q(0.025), q(0.975)))
}

pub fn contrast(logs: &[EpisodeLog], treatment: ConditionKind, control: ConditionKind, resamples: usize, seed: u64) -> Result<Contrast> {
    let a = final_trial_scores(logs, treatment);
    let b = final_trial_scores(logs, control);
    let (difference, ci_low, ci_high) = bootstrap_mean_diff(&a, &b, resamples, seed)?;
    Ok(Contrast { treatment, control, n_treatment: a.len(), n_control: b.len(), difference, ci_low, ci_high })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowAccuracy {
    pub rounds: usize,
    /// Online prediction accuracy inside the window (unpredicted rounds count as misses).
    pub tom: f64,
    /// Accuracy of always playing the action most frequent before the window.
    pub majority: f64,
}

/// Accuracy over the last `tail` rounds of one participant.
pub fn window_accuracy(rounds: &[RoundRecord], tail: usize) -> Result<WindowAccuracy> {
    if tail == 0 || rounds.len() <= tail {
        return Err(Error::Data(format!("need more than {tail} rounds, have {}", rounds.len())));
    }
    let (history, window) = rounds.split_at(rounds.len() - tail);
    let calls = history.iter().filter(|r| r.human_action == ActionKind::Call).count();
    let majority = if 2 * calls > history.len() { ActionKind::Call } else { ActionKind::Solo };
    let hits = |f: &dyn Fn(&RoundRecord) -> bool| window.iter().filter(|r| f(r)).count() as f64 / tail as f64;
    Ok(WindowAccuracy {
        rounds: tail,
        tom: hits(&|r| r.a_pred == Some(r.human_action)),
        majority: hits(&|r| r.human_action == majority),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_hand_values() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((se.unwrap() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, None));
    }

    #[test]
    fn bootstrap_brackets_a_clear_difference() {
        let a: Vec<f64> = (0..100).map(|i| 10.0 + (i % 5) as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| (i % 5) as f64).collect();
        let (d, lo, hi) = bootstrap_mean_diff(&a, &b, 500, 1).unwrap();
        assert_eq!(d, 10.0);
        assert!(lo <= d && d <= hi && lo > 9.0 && hi < 11.0);
        assert!(bootstrap_mean_diff(&a, &[], 10, 1).is_err());
    }
}
