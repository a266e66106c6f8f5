use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{intervention_rate, score_rows, ComplianceRow, Contrast, CurveRow, ScoreRow};
use super::prediction::FoldRow;
use super::ExperimentResult;
use crate::engine::{ConditionKind, EpisodeLog, RoundRecord};
use crate::error::{Error, Result};

const NA: &str = "NA";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == NA {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Data(format!("bad number {s:?}")))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Data(format!("bad field {s:?}")))
}

/// One line of a `logs/*.jsonl` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub condition: ConditionKind,
    pub participant: u32,
    pub profile: String,
    pub seed: u64,
    #[serde(flatten)]
    pub record: RoundRecord,
}

pub fn write_log(path: &Path, log: &EpisodeLog) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in &log.rounds {
        let line = LogLine {
            condition: log.condition,
            participant: log.participant,
            profile: log.profile.clone(),
            seed: log.seed,
            record: r.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn log_file_name(log: &EpisodeLog) -> String {
    format!("{}_p{:04}.jsonl", log.condition, log.participant)
}

pub fn write_logs(dir: &Path, logs: &[EpisodeLog]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for log in logs {
        write_log(&dir.join(log_file_name(log)), log)?;
    }
    Ok(())
}

/// Rebuilds episode logs from a directory of `.jsonl` files. Trial scores are
/// re-accumulated from the per-round rewards of completed trials.
pub fn read_logs(dir: &Path) -> Result<Vec<EpisodeLog>> {
    let mut by: BTreeMap<(ConditionKind, u32), EpisodeLog> = BTreeMap::new();
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        for line in BufReader::new(fs::File::open(&path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: LogLine = serde_json::from_str(&line)?;
            let log = by.entry((l.condition, l.participant)).or_insert_with(|| EpisodeLog {
                condition: l.condition,
                participant: l.participant,
                profile: l.profile.clone(),
                seed: l.seed,
                rounds: Vec::new(),
                trial_scores: Vec::new(),
            });
            log.rounds.push(l.record);
        }
    }
    let mut logs: Vec<EpisodeLog> = by.into_values().collect();
    for log in &mut logs {
        log.rounds.sort_by_key(|r| r.round);
        let mut score = 0.0;
        for r in &log.rounds {
            score += r.reward;
            if r.done {
                log.trial_scores.push(score);
                score = 0.0;
            }
        }
    }
    Ok(logs)
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv_writer(path, &["condition", "trial", "mean", "se", "n", "training"])?;
    for r in rows {
        w.write_record([r.condition.to_string(), r.trial.to_string(), r.mean.to_string(), opt(r.se), r.n.to_string(), r.training.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_path(path)?.records() {
        let rec = rec?;
        rows.push(CurveRow {
            condition: parse(&rec[0])?,
            trial: parse(&rec[1])?,
            mean: parse(&rec[2])?,
            se: parse_opt(&rec[3])?,
            n: parse(&rec[4])?,
            training: parse(&rec[5])?,
        });
    }
    Ok(rows)
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv_writer(path, &["condition", "participant", "profile", "trial", "training", "score"])?;
    for r in rows {
        w.write_record([
            r.condition.to_string(),
            r.participant.to_string(),
            r.profile.clone(),
            r.trial.to_string(),
            r.training.to_string(),
            r.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_path(path)?.records() {
        let rec = rec?;
        rows.push(ScoreRow {
            condition: parse(&rec[0])?,
            participant: parse(&rec[1])?,
            profile: rec[2].to_string(),
            trial: parse(&rec[3])?,
            training: parse(&rec[4])?,
            score: parse(&rec[5])?,
        });
    }
    Ok(rows)
}

pub fn write_compliance(path: &Path, rows: &[ComplianceRow]) -> Result<()> {
    let mut w = csv_writer(
        path,
        &["condition", "interventions", "followed", "short_term", "long_term_eligible", "long_term_adopted", "long_term", "tips"],
    )?;
    for r in rows {
        w.write_record([
            r.condition.map_or_else(|| "all".to_string(), |c| c.to_string()),
            r.interventions.to_string(),
            r.followed.to_string(),
            opt(r.short_term),
            r.long_term_eligible.to_string(),
            r.long_term_adopted.to_string(),
            opt(r.long_term),
            r.tips.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions(path: &Path, folds: &[FoldRow], pooled: &FoldRow) -> Result<()> {
    let mut w = csv_writer(
        path,
        &["fold", "participants", "rounds", "tom_rounds", "tom_accuracy", "majority_accuracy", "logistic_accuracy"],
    )?;
    for r in folds.iter().chain(std::iter::once(pooled)) {
        w.write_record([
            r.fold.map_or_else(|| "all".to_string(), |f| f.to_string()),
            r.participants.to_string(),
            r.rounds.to_string(),
            r.tom_rounds.to_string(),
            opt(r.tom_accuracy()),
            opt(r.majority_accuracy()),
            opt(r.logistic_accuracy()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub condition: ConditionKind,
    pub interventions: usize,
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub participants: u32,
    pub spec_hash: String,
    pub intervention_rates: Vec<RateRow>,
    pub contrast: Option<Contrast>,
    pub logistic_loss: Option<Vec<f64>>,
}

/// Writes every output file of an experiment into `dir`.
pub fn write_outputs(dir: &Path, seed: u64, participants: u32, write_raw_logs: bool, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_curves(&dir.join("curves.csv"), &result.curves)?;
    write_scores(&dir.join("scores.csv"), &score_rows(&result.logs))?;
    write_compliance(&dir.join("compliance.csv"), &result.compliance)?;
    if let Some(p) = &result.predictions {
        write_predictions(&dir.join("predictions.csv"), &p.folds, &p.pooled)?;
    }
    if write_raw_logs {
        write_logs(&dir.join("logs"), &result.logs)?;
    }
    let mut rates: Vec<RateRow> = Vec::new();
    for c in ConditionKind::ALL {
        let logs: Vec<EpisodeLog> = result.logs.iter().filter(|l| l.condition == c).cloned().collect();
        if !logs.is_empty() {
            let (interventions, rounds) = intervention_rate(&logs);
            rates.push(RateRow { condition: c, interventions, rounds });
        }
    }
    let summary = ExperimentSummary {
        seed,
        participants,
        spec_hash: result.policy.spec().hash(),
        intervention_rates: rates,
        contrast: result.contrast.clone(),
        logistic_loss: result.predictions.as_ref().map(|p| p.loss_history.clone()),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
