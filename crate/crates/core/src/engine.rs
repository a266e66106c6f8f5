//! One participant's play-through: task episodes, the Theory-of-Mind observer
//! and the condition-specific intervention logic.
//!
//! The experiment harness and the HTTP service both drive this type, so a
//! scripted session through either path produces the same log.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::mix_seed;
use crate::intervention::{decide, explain, Intervention, InterventionSource, Templates};
use crate::policy::{Policy, SolverConfig};
use crate::task::{initial_state, step, ActionKind, Feature, PayoffSpec, RoundState, StateKey};
use crate::tom::{TomConfig, TomModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    TomXrl,
    XrlOnly,
    TomOnly,
    None,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 4] = [ConditionKind::TomXrl, ConditionKind::XrlOnly, ConditionKind::TomOnly, ConditionKind::None];

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::TomXrl => "tom_xrl",
            ConditionKind::XrlOnly => "xrl_only",
            ConditionKind::TomOnly => "tom_only",
            ConditionKind::None => "none",
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match norm.as_str() {
            "tomxrl" => Ok(ConditionKind::TomXrl),
            "xrlonly" | "xrl" => Ok(ConditionKind::XrlOnly),
            "tomonly" | "tom" => Ok(ConditionKind::TomOnly),
            "none" | "nointervention" | "control" => Ok(ConditionKind::None),
            _ => Err(Error::Config(format!("unknown condition {s:?}"))),
        }
    }
}

/// Everything needed to run one participant, minus the participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub spec: PayoffSpec,
    pub solver: SolverConfig,
    pub tom: TomConfig,
    pub templates: Templates,
    /// Episodes per participant.
    pub trials: u32,
    /// Leading episodes flagged as training.
    pub training_trials: u32,
    /// Frequency filter for the xrl-only interventions and tom-only tips.
    pub rho: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            spec: PayoffSpec::default(),
            solver: SolverConfig::default(),
            tom: TomConfig::default(),
            templates: Templates::default(),
            trials: 12,
            training_trials: 3,
            rho: 0.095,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.tom.validate()?;
        self.templates.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.training_trials > self.trials {
            return Err(Error::config("training_trials exceeds trials"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Generic strategy tip (tom-only condition).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tip {
    pub round: u64,
    pub feature: Feature,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub trial: u32,
    pub training: bool,
    pub state: RoundState,
    pub expert_action: ActionKind,
    pub intervention: Option<Intervention>,
    pub tip: Option<Tip>,
    pub human_action: ActionKind,
    pub reward: f64,
    pub time_cost: f64,
    pub done: bool,
    pub a_pred: Option<ActionKind>,
    pub confidence: Option<f64>,
    pub threshold: f64,
    pub tom_initialized: bool,
    pub dag_before: String,
    pub parents_before: Vec<Feature>,
    /// A structure-learning pass ran after this round's observation.
    pub maintenance: bool,
    pub dag_after: String,
    pub parents_after: Vec<Feature>,
}

impl RoundRecord {
    pub fn key(&self) -> StateKey {
        self.state.key()
    }
}

/// Full log of one participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub condition: ConditionKind,
    pub participant: u32,
    pub profile: String,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub trial_scores: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub reward: f64,
    pub time_cost: f64,
    /// The current trial ended with this action.
    pub done: bool,
    /// No trials remain.
    pub finished: bool,
}

#[derive(Clone, Debug)]
pub struct Engine {
    config: Arc<EngineConfig>,
    policy: Arc<Policy>,
    condition: ConditionKind,
    seed: u64,
    env_rng: ChaCha8Rng,
    filter_rng: ChaCha8Rng,
    state: RoundState,
    trial: u32,
    round: u64,
    trial_score: f64,
    trial_scores: Vec<f64>,
    tom: TomModel,
    intervention: Option<Intervention>,
    tip: Option<Tip>,
    last_action: Option<ActionKind>,
    log: Vec<RoundRecord>,
    finished: bool,
}

impl Engine {
    pub fn new(config: Arc<EngineConfig>, policy: Arc<Policy>, condition: ConditionKind, seed: u64) -> Result<Engine> {
        config.validate()?;
        if policy.spec() != &config.spec {
            return Err(Error::config("policy was trained for a different payoff spec"));
        }
        let mut env_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
        let state = initial_state(&config.spec, &mut env_rng);
        let mut engine = Engine {
            tom: TomModel::new(config.tom.clone())?,
            config,
            policy,
            condition,
            seed,
            env_rng,
            filter_rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, 2)),
            state,
            trial: 1,
            round: 0,
            trial_score: 0.0,
            trial_scores: Vec::new(),
            intervention: None,
            tip: None,
            last_action: None,
            log: Vec::new(),
            finished: false,
        };
        engine.prepare_round()?;
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn condition(&self) -> ConditionKind {
        self.condition
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &RoundState {
        &self.state
    }

    pub fn key(&self) -> StateKey {
        self.state.key()
    }

    /// 1-based trial number.
    pub fn trial(&self) -> u32 {
        self.trial
    }

    pub fn is_training(&self) -> bool {
        self.trial <= self.config.training_trials
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn trial_score(&self) -> f64 {
        self.trial_score
    }

    pub fn trial_scores(&self) -> &[f64] {
        &self.trial_scores
    }

    /// Bombs already handled in the current trial.
    pub fn bombs_handled(&self) -> u32 {
        self.config.spec.n_bombs - self.state.bombs_remaining
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn tom(&self) -> &TomModel {
        &self.tom
    }

    pub fn intervention(&self) -> Option<&Intervention> {
        self.intervention.as_ref()
    }

    pub fn tip(&self) -> Option<&Tip> {
        self.tip.as_ref()
    }

    pub fn log(&self) -> &[RoundRecord] {
        &self.log
    }

    fn prepare_round(&mut self) -> Result<()> {
        let key = self.key();
        self.intervention = None;
        self.tip = None;
        match self.condition {
            ConditionKind::TomXrl => {
                self.intervention = decide(&key, self.round, &self.tom, &self.policy, &self.config.templates)?;
            }
            ConditionKind::XrlOnly => {
                if self.filter_rng.random_bool(self.config.rho) {
                    let (recommended, feature, text, counterfactual) = explain(&self.policy, &key, None, &self.config.templates)?;
                    let (a_pred, confidence) = match self.tom.predict(&key) {
                        Ok((a, c)) => (Some(a), Some(c)),
                        Err(_) => (None, None),
                    };
                    self.intervention = Some(Intervention {
                        round: self.round,
                        source: InterventionSource::XrlOnly,
                        recommended,
                        feature,
                        text,
                        counterfactual,
                        a_pred,
                        confidence,
                        threshold: Some(self.tom.threshold()),
                    });
                }
            }
            ConditionKind::TomOnly => {
                if let Some(last) = self.last_action {
                    if self.filter_rng.random_bool(self.config.rho) {
                        let (feature, text) = self.config.templates.tip(last)?;
                        self.tip = Some(Tip { round: self.round, feature, text });
                    }
                }
            }
            ConditionKind::None => {}
        }
        Ok(())
    }

    /// Plays `action` in the current round.
    pub fn apply(&mut self, action: ActionKind) -> Result<ActionReport> {
        if self.finished {
            return Err(Error::Finished);
        }
        let key = self.key();
        let expert_action = self.policy.action_at(&key)?;
        let (a_pred, confidence) = match self.tom.predict(&key) {
            Ok((a, c)) => (Some(a), Some(c)),
            Err(_) => (None, None),
        };
        let threshold = self.tom.threshold();
        let tom_initialized = self.tom.is_initialized();
        let dag_before = self.tom.dag().signature();
        let parents_before = self.tom.action_parents();

        let out = step(&self.state, action, &self.config.spec, &mut self.env_rng)?;
        let tom_report = self.tom.observe(&key, action)?;

        self.log.push(RoundRecord {
            round: self.round,
            trial: self.trial,
            training: self.is_training(),
            state: self.state.clone(),
            expert_action,
            intervention: self.intervention.take(),
            tip: self.tip.take(),
            human_action: action,
            reward: out.reward,
            time_cost: out.time_cost,
            done: out.done,
            a_pred,
            confidence,
            threshold,
            tom_initialized,
            dag_before,
            parents_before,
            maintenance: tom_report.maintenance,
            dag_after: self.tom.dag().signature(),
            parents_after: self.tom.action_parents(),
        });

        self.trial_score += out.reward;
        self.round += 1;
        self.last_action = Some(action);
        if out.done {
            self.trial_scores.push(self.trial_score);
            self.trial_score = 0.0;
            if self.trial >= self.config.trials {
                self.finished = true;
            } else {
                self.trial += 1;
                self.state = initial_state(&self.config.spec, &mut self.env_rng);
            }
        } else {
            self.state = out.next;
        }
        if !self.finished {
            self.prepare_round()?;
        }
        Ok(ActionReport { reward: out.reward, time_cost: out.time_cost, done: out.done, finished: self.finished })
    }

    pub fn into_log(self, participant: u32, profile: &str) -> EpisodeLog {
        EpisodeLog {
            condition: self.condition,
            participant,
            profile: profile.to_string(),
            seed: self.seed,
            rounds: self.log,
            trial_scores: self.trial_scores,
        }
    }

    /// Log snapshot without consuming the engine.
    pub fn episode_log(&self, participant: u32, profile: &str) -> EpisodeLog {
        self.clone().into_log(participant, profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::train_policy;

    fn setup(condition: ConditionKind, rho: f64) -> Engine {
        let config = EngineConfig { trials: 3, training_trials: 1, rho, ..EngineConfig::default() };
        let policy = Arc::new(train_policy(&config.spec, &config.solver).unwrap());
        Engine::new(Arc::new(config), policy, condition, 11).unwrap()
    }

    #[test]
    fn plays_all_trials_then_refuses() {
        let mut e = setup(ConditionKind::None, 0.0);
        let mut n = 0;
        while !e.is_finished() {
            let a = if n % 2 == 0 { ActionKind::Solo } else { ActionKind::Call };
            e.apply(a).unwrap();
            n += 1;
        }
        assert_eq!(e.trial_scores().len(), 3);
        assert_eq!(e.log().len(), n);
        let sum: f64 = e.log().iter().map(|r| r.reward).sum();
        assert_eq!(sum, e.trial_scores().iter().sum::<f64>());
        assert!(matches!(e.apply(ActionKind::Solo), Err(Error::Finished)));
        assert!(e.log().windows(2).all(|w| w[0].round < w[1].round));
        assert!(e.log().iter().all(|r| r.intervention.is_none() && r.tip.is_none()));
        assert!(e.log().iter().all(|r| r.training == (r.trial == 1)));
    }

    #[test]
    fn xrl_only_with_rho_one_always_recommends() {
        let mut e = setup(ConditionKind::XrlOnly, 1.0);
        for _ in 0..10 {
            let iv = e.intervention().cloned().unwrap();
            assert_eq!(iv.recommended, e.policy().action_at(&e.key()).unwrap());
            e.apply(ActionKind::Call).unwrap();
        }
    }

    #[test]
    fn tom_only_tips_carry_no_recommendation() {
        let mut e = setup(ConditionKind::TomOnly, 1.0);
        assert!(e.tip().is_none(), "no tip before the first action");
        e.apply(ActionKind::Call).unwrap();
        assert_eq!(e.tip().unwrap().feature, Feature::Distance);
        assert!(e.intervention().is_none());
    }

    #[test]
    fn same_seed_same_log() {
        let run = || {
            let mut e = setup(ConditionKind::TomXrl, 0.0);
            let mut i = 0usize;
            while !e.is_finished() {
                let a = if e.state().bomb_type >= 2 || i.is_multiple_of(5) { ActionKind::Call } else { ActionKind::Solo };
                e.apply(a).unwrap();
                i += 1;
            }
            e.into_log(0, "scripted")
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn condition_names_parse() {
        for c in ConditionKind::ALL {
            assert_eq!(c.name().parse::<ConditionKind>().unwrap(), c);
        }
        assert_eq!("ToM+XRL".parse::<ConditionKind>().unwrap(), ConditionKind::TomXrl);
        assert!("bogus".parse::<ConditionKind>().is_err());
    }
}
