//! Simulated players with limited feature attention and probabilistic
//! compliance.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Policy, StateSpace};
use crate::task::{ActionKind, DistanceBin, Feature, StateKey, TimeBin};

/// How a simulated player maps what it attends to onto an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Highest immediate points for the bomb level; ignores everything else.
    Myopic,
    /// The expert action itself (also sees `bombs_remaining`).
    Expert,
    /// Majority expert action over all states that look the same through the
    /// attended features.
    ExpertMarginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanProfile {
    pub name: String,
    pub attended: BTreeSet<Feature>,
    pub rule: DecisionRule,
    /// Rule adopted after an explanation adds a feature.
    #[serde(default = "default_enriched")]
    pub enriched_rule: DecisionRule,
    /// Probability of a uniformly random action.
    pub epsilon: f64,
    /// Probability of following a recommendation in the round it is shown.
    pub p_short: f64,
    /// Probability that an explanation's feature is attended from then on.
    pub p_long: f64,
}

fn default_enriched() -> DecisionRule {
    DecisionRule::ExpertMarginal
}

impl HumanProfile {
    /// Built-in profiles: `time_blind_myopic`, `distance_blind`, `noisy_expert`.
    pub fn library() -> Vec<HumanProfile> {
        vec![
            HumanProfile {
                name: "time_blind_myopic".into(),
                attended: BTreeSet::from([Feature::BombType]),
                rule: DecisionRule::Myopic,
                enriched_rule: DecisionRule::ExpertMarginal,
                epsilon: 0.05,
                p_short: 0.87,
                p_long: 0.48,
            },
            HumanProfile {
                name: "distance_blind".into(),
                attended: BTreeSet::from([Feature::BombType, Feature::Time]),
                rule: DecisionRule::ExpertMarginal,
                enriched_rule: DecisionRule::ExpertMarginal,
                epsilon: 0.05,
                p_short: 0.87,
                p_long: 0.48,
            },
            HumanProfile {
                name: "noisy_expert".into(),
                attended: BTreeSet::from(Feature::ALL),
                rule: DecisionRule::Expert,
                enriched_rule: DecisionRule::Expert,
                epsilon: 0.1,
                p_short: 0.87,
                p_long: 0.48,
            },
        ]
    }

    pub fn find<'a>(profiles: &'a [HumanProfile], name: &str) -> Result<&'a HumanProfile> {
        profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("unknown profile {name:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        for (label, p) in [("epsilon", self.epsilon), ("p_short", self.p_short), ("p_long", self.p_long)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{label} of profile {} must lie in [0, 1]", self.name)));
            }
        }
        if self.rule == DecisionRule::Myopic && !self.attended.contains(&Feature::BombType) {
            return Err(Error::Config(format!("myopic profile {} must attend bomb_type", self.name)));
        }
        Ok(())
    }
}

fn cell(b: usize, d: usize, t: usize) -> usize {
    (b * 3 + d) * 3 + t
}

/// A running simulated player: its profile plus the derived choice table.
#[derive(Clone, Debug)]
pub struct SimHuman {
    profile: HumanProfile,
    policy: Arc<Policy>,
    /// Deterministic base choice per observation cell (unused by `Expert`).
    base: Vec<ActionKind>,
}

impl SimHuman {
    pub fn new(profile: HumanProfile, policy: Arc<Policy>) -> Result<SimHuman> {
        profile.validate()?;
        let mut human = SimHuman { profile, policy, base: Vec::new() };
        human.rebuild();
        Ok(human)
    }

    pub fn profile(&self) -> &HumanProfile {
        &self.profile
    }

    fn rebuild(&mut self) {
        let spec = self.policy.spec().clone();
        let space: StateSpace = self.policy.space();
        let mut base = vec![ActionKind::Solo; 27];
        for b in 0..3 {
            for d in 0..3 {
                for t in 0..3 {
                    base[cell(b, d, t)] = match self.profile.rule {
                        DecisionRule::Myopic => {
                            let level = b as u8 + 1;
                            if spec.reward(level, ActionKind::Call) > spec.reward(level, ActionKind::Solo) {
                                ActionKind::Call
                            } else {
                                ActionKind::Solo
                            }
                        }
                        DecisionRule::Expert => ActionKind::Solo,
                        DecisionRule::ExpertMarginal => {
                            let looks_same = |k: &StateKey| {
                                self.profile.attended.iter().all(|f| k.ordinal(*f) == [b, d, t][*f as usize])
                            };
                            let (mut solo, mut call) = (0usize, 0usize);
                            for k in space.keys().filter(looks_same) {
                                match self.policy.action_at(&k).expect("indexed") {
                                    ActionKind::Solo => solo += 1,
                                    ActionKind::Call => call += 1,
                                }
                            }
                            if call > solo {
                                ActionKind::Call
                            } else {
                                ActionKind::Solo
                            }
                        }
                    };
                }
            }
        }
        self.base = base;
    }

    /// Noise-free choice in `key`.
    pub fn base_action(&self, key: &StateKey) -> ActionKind {
        match self.profile.rule {
            DecisionRule::Expert => self.policy.action_at(key).unwrap_or(ActionKind::Solo),
            _ => {
                let [b, d, t] = key.observation();
                self.base[cell(b, d, t)]
            }
        }
    }

    /// `[P(Solo), P(Call)]` without a pending recommendation.
    pub fn action_probs(&self, key: &StateKey) -> [f64; 2] {
        let eps = self.profile.epsilon;
        let mut p = [eps / 2.0; 2];
        p[self.base_action(key).index()] += 1.0 - eps;
        p
    }

    /// Chooses an action, following `recommended` with probability `p_short`.
    pub fn act<R: Rng + ?Sized>(&self, key: &StateKey, recommended: Option<ActionKind>, rng: &mut R) -> ActionKind {
        if let Some(rec) = recommended {
            if rng.random_bool(self.profile.p_short) {
                return rec;
            }
        }
        if rng.random::<f64>() < self.action_probs(key)[ActionKind::Call.index()] {
            ActionKind::Call
        } else {
            ActionKind::Solo
        }
    }

    /// With probability `p_long`, starts attending `feature` and switches to
    /// the enriched rule. Returns whether the feature was adopted.
    pub fn absorb<R: Rng + ?Sized>(&mut self, feature: Feature, rng: &mut R) -> bool {
        if !rng.random_bool(self.profile.p_long) {
            return false;
        }
        let added = self.profile.attended.insert(feature);
        if added {
            self.profile.rule = self.profile.enriched_rule;
            self.rebuild();
        }
        true
    }
}

/// Every observation cell, for exhaustive checks.
pub fn observation_cells() -> impl Iterator<Item = (u8, DistanceBin, TimeBin)> {
    (1..=3u8).flat_map(|b| DistanceBin::ALL.into_iter().flat_map(move |d| TimeBin::ALL.into_iter().map(move |t| (b, d, t))))
}
